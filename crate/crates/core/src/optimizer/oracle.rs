use crate::compiler::ConstraintSet;
use crate::geometry::{footprint_contained, Rect, Surface};
use crate::scene::{footprint, region_in_bbox, AssetSpec, Layout, Orientation, Placement};

use super::predicates::{relation_excess, soft_term_score};
use super::{check_hard, stack_top, OptimizerError, SolverParams};

pub const ORACLE_MAX_ASSETS: usize = 3;
/// Largest lattice side the oracle accepts.
pub const ORACLE_MAX_LATTICE: usize = 6;

struct Oracle<'a> {
    cs: &'a ConstraintSet,
    surfaces: &'a [Surface],
    params: &'a SolverParams,
    assets: Vec<&'a AssetSpec>,
    /// Per asset: (row, column, quarter turns) tuples passing the unary checks.
    unary: Vec<Vec<(usize, usize, usize)>>,
    best: Option<(f64, Vec<(usize, usize, usize)>)>,
}

fn lattice(surface: &Surface, step: f64) -> (usize, usize) {
    (
        (surface.bbox.width() / step + 1e-9).floor() as usize + 1,
        (surface.bbox.depth() / step + 1e-9).floor() as usize + 1,
    )
}

impl Oracle<'_> {
    fn rect(&self, i: usize, t: (usize, usize, usize)) -> Rect {
        let a = self.assets[i];
        let s = &self.surfaces[a.surface_index];
        let x = s.bbox.min_x + t.1 as f64 * self.params.grid_step_cm;
        let y = s.bbox.min_y + t.0 as f64 * self.params.grid_step_cm;
        footprint(a, x, y, Orientation::from_quarter_turns(t.2))
    }

    fn compatible(&self, i: usize, ti: (usize, usize, usize), j: usize, tj: (usize, usize, usize)) -> bool {
        let (a, b) = (self.assets[i], self.assets[j]);
        if a.surface_index != b.surface_index {
            return true;
        }
        let (ri, rj) = (self.rect(i, ti), self.rect(j, tj));
        if self.cs.stack_level(&a.id) == self.cs.stack_level(&b.id) && ri.intersection_area(&rj) > 1e-9 {
            return false;
        }
        self.cs.hard_pairs.iter().all(|h| {
            if h.subject == a.id && h.reference == b.id {
                relation_excess(h.relation, &ri, &rj) <= 1e-9
            } else if h.subject == b.id && h.reference == a.id {
                relation_excess(h.relation, &rj, &ri) <= 1e-9
            } else {
                true
            }
        })
    }

    fn score(&self, tuple: &[(usize, usize, usize)]) -> f64 {
        let pos = |id: &str| self.assets.iter().position(|a| a.id == id).expect("known asset");
        self.cs
            .soft_pairs
            .iter()
            .map(|p| {
                let (s, r) = (pos(&p.subject), pos(&p.reference));
                soft_term_score(p.term, &self.rect(s, tuple[s]), &self.rect(r, tuple[r]), self.params)
            })
            .sum()
    }

    fn search(&mut self, tuple: &mut Vec<(usize, usize, usize)>) {
        let i = tuple.len();
        if i == self.assets.len() {
            let s = self.score(tuple);
            if self.best.as_ref().is_none_or(|(b, _)| s > b + 1e-12) {
                self.best = Some((s, tuple.clone()));
            }
            return;
        }
        for k in 0..self.unary[i].len() {
            let t = self.unary[i][k];
            if (0..i).all(|j| self.compatible(i, t, j, tuple[j])) {
                tuple.push(t);
                self.search(tuple);
                tuple.pop();
            }
        }
    }
}

/// Exhaustive optimum over the placement lattice for tiny instances. Every
/// (position, orientation) tuple is enumerated with assets in id order and
/// each asset's candidates in (row, column, quarter turn) order; the first
/// tuple reaching the best score wins.
pub fn brute_force_solve(cs: &ConstraintSet, surfaces: &[Surface], params: &SolverParams) -> Result<Layout, OptimizerError> {
    params.validate()?;
    if cs.assets.len() > ORACLE_MAX_ASSETS {
        return Err(OptimizerError::TooLarge(format!("{} assets (max {ORACLE_MAX_ASSETS})", cs.assets.len())));
    }
    let mut assets: Vec<&AssetSpec> = cs.assets.iter().collect();
    assets.sort_by(|a, b| a.id.cmp(&b.id));
    for a in &assets {
        let s = surfaces.get(a.surface_index).ok_or(OptimizerError::UnknownSurface(a.surface_index))?;
        let (nx, ny) = lattice(s, params.grid_step_cm);
        if nx > ORACLE_MAX_LATTICE || ny > ORACLE_MAX_LATTICE {
            return Err(OptimizerError::TooLarge(format!("{nx}×{ny} lattice (max {ORACLE_MAX_LATTICE}×{ORACLE_MAX_LATTICE})")));
        }
    }
    let mut oracle = Oracle { cs, surfaces, params, assets, unary: Vec::new(), best: None };
    for i in 0..oracle.assets.len() {
        let a = oracle.assets[i];
        let s = &surfaces[a.surface_index];
        let (nx, ny) = lattice(s, params.grid_step_cm);
        let fits_height = s.clearance_cm.is_none_or(|c| stack_top(cs, &a.id) - c <= 1e-9);
        let stacked = cs.base_of(&a.id).is_some();
        let region = cs.globals.iter().find(|g| g.subject == a.id).map(|g| g.region);
        let fixed = cs.fixed_orientations.get(&a.id).map(|o| o.quarter_turns());
        let mut list = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                for o in 0..4 {
                    let t = (iy, ix, o);
                    let r = oracle.rect(i, t);
                    let ok = fits_height
                        && fixed.is_none_or(|f| f == o)
                        && (stacked || footprint_contained(s, &r.inflate(params.edge_margin_cm)))
                        && region.is_none_or(|want| {
                            let (cx, cy) = r.center();
                            region_in_bbox(&s.bbox, cx, cy).is_ok_and(|got| got == want)
                        });
                    if ok {
                        list.push(t);
                    }
                }
            }
        }
        oracle.unary.push(list);
    }
    let mut tuple = Vec::new();
    oracle.search(&mut tuple);
    let Some((_, best)) = oracle.best.take() else {
        let asset = oracle.assets.first().map(|a| a.id.clone()).unwrap_or_default();
        return Err(OptimizerError::Infeasible {
            asset,
            surface: oracle.assets.first().map_or(0, |a| a.surface_index),
            reasons: vec!["no feasible tuple on the lattice".into()],
        });
    };
    let mut layout = Layout::default();
    for (i, &t) in best.iter().enumerate() {
        let a = oracle.assets[i];
        let s = &surfaces[a.surface_index];
        let mut z = s.height_cm;
        let mut cur = a.id.as_str();
        while let Some(b) = cs.base_of(cur) {
            z += cs.asset(b).map_or(0.0, |x| x.height_cm);
            cur = b;
        }
        let (cx, cy) = (s.bbox.min_x + t.1 as f64 * params.grid_step_cm, s.bbox.min_y + t.0 as f64 * params.grid_step_cm);
        layout.insert(
            a.id.clone(),
            Placement {
                x_cm: cx,
                y_cm: cy,
                orientation: Orientation::from_quarter_turns(t.2),
                stack_base: cs.base_of(&a.id).map(str::to_string),
                z_cm: z,
            },
        );
    }
    let v = check_hard(&layout, cs, surfaces, params);
    if !v.is_empty() {
        return Err(OptimizerError::Unsafe(v));
    }
    Ok(layout)
}
