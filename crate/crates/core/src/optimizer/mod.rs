//! Placement optimization: maximise the summed soft scores subject to the
//! hard constraints, on a lattice over each surface's bounding box.

mod oracle;
pub mod predicates;
mod solve;

pub use oracle::{brute_force_solve, ORACLE_MAX_ASSETS, ORACLE_MAX_LATTICE};
pub use solve::{constructive, solve, solve_surface, solve_warm, WarmStart};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::ConstraintSet;
use crate::geometry::{footprint_contained, Rect, Surface};
use crate::scene::{footprint, region_in_bbox, AssetSpec, Layout, PositionRelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub grid_step_cm: f64,
    pub seed: u64,
    /// Annealing iterations per surface.
    pub anneal_iters: usize,
    pub t0: f64,
    /// Geometric cooling factor applied every iteration.
    pub cooling: f64,
    pub d_near_cm: f64,
    pub d_far_cm: f64,
    pub t_align_cm: f64,
    pub edge_margin_cm: f64,
    /// Standard deviation of jitter moves.
    pub jitter_sigma_cm: f64,
    /// Weight of the warm-start anchor term per anchored asset.
    pub anchor_weight: f64,
    /// Displacement at which the anchor term reaches zero.
    pub anchor_radius_cm: f64,
    /// Alternatives kept per asset during constructive placement.
    pub branch_width: usize,
    /// Total placements the constructive phase may try before giving up.
    pub placement_budget: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            grid_step_cm: 1.0,
            seed: 0,
            anneal_iters: 20_000,
            t0: 1.0,
            cooling: 0.999,
            d_near_cm: 15.0,
            d_far_cm: 30.0,
            t_align_cm: 5.0,
            edge_margin_cm: 1.0,
            jitter_sigma_cm: 5.0,
            anchor_weight: 0.25,
            anchor_radius_cm: 30.0,
            branch_width: 3,
            placement_budget: 4_000,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let positive = [
            ("grid_step_cm", self.grid_step_cm),
            ("t0", self.t0),
            ("d_near_cm", self.d_near_cm),
            ("d_far_cm", self.d_far_cm),
            ("t_align_cm", self.t_align_cm),
            ("jitter_sigma_cm", self.jitter_sigma_cm),
            ("anchor_radius_cm", self.anchor_radius_cm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OptimizerError::InvalidParams(format!("{name} must be positive")));
            }
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(OptimizerError::InvalidParams("cooling must lie in (0, 1)".into()));
        }
        if !(self.edge_margin_cm >= 0.0) || !(self.anchor_weight >= 0.0) {
            return Err(OptimizerError::InvalidParams("edge_margin_cm and anchor_weight must be non-negative".into()));
        }
        if self.branch_width == 0 {
            return Err(OptimizerError::InvalidParams("branch_width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Containment,
    Overlap,
    GlobalRegion,
    Relation,
    Stacking,
    Orientation,
    Clearance,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("kind serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// A broken hard constraint. `magnitude` is in cm for bounds and distances
/// and in cm² for areas (overlap, stacking overhang, unsupported footprint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subjects: Vec<String>,
    pub magnitude: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("layout has no placement for asset `{0}`")]
    MissingAsset(String),
    #[error("surface {0} does not exist")]
    UnknownSurface(usize),
    #[error("no feasible position for `{asset}` on surface {surface}: {}", reasons.join("; "))]
    Infeasible { asset: String, surface: usize, reasons: Vec<String> },
    #[error("instance exceeds oracle bounds: {0}")]
    TooLarge(String),
    #[error("solver produced a layout with {} hard-constraint violation(s)", .0.len())]
    Unsafe(Vec<Violation>),
}

/// Sum of the soft scores of every distance and alignment directive.
pub fn soft_score(layout: &Layout, cs: &ConstraintSet, params: &SolverParams) -> Result<f64, OptimizerError> {
    let mut total = 0.0;
    for p in &cs.soft_pairs {
        let s = placed_rect(layout, cs, &p.subject)?;
        let r = placed_rect(layout, cs, &p.reference)?;
        total += predicates::soft_term_score(p.term, &s, &r, params);
    }
    Ok(total)
}

fn placed_rect(layout: &Layout, cs: &ConstraintSet, id: &str) -> Result<Rect, OptimizerError> {
    let a = cs.asset(id).ok_or_else(|| OptimizerError::MissingAsset(id.to_string()))?;
    let p = layout.get(id).ok_or_else(|| OptimizerError::MissingAsset(id.to_string()))?;
    Ok(footprint(a, p.x_cm, p.y_cm, p.orientation))
}

/// Height of the stack below `id` plus its own height.
pub(crate) fn stack_top(cs: &ConstraintSet, id: &str) -> f64 {
    let mut total = cs.asset(id).map_or(0.0, |a| a.height_cm);
    let mut cur = id;
    let mut guard = 0;
    while let Some(b) = cs.base_of(cur) {
        total += cs.asset(b).map_or(0.0, |a| a.height_cm);
        cur = b;
        guard += 1;
        if guard > cs.assets.len() {
            break;
        }
    }
    total
}

const EPS: f64 = 1e-9;

/// Every violated hard constraint of `layout`. An asset without a placement
/// is reported as a containment violation with its full footprint area.
pub fn check_hard(layout: &Layout, cs: &ConstraintSet, surfaces: &[Surface], params: &SolverParams) -> Vec<Violation> {
    check_hard_on(layout, cs, surfaces, params, None)
}

/// [`check_hard`] restricted to the assets of one surface when `only` is set.
pub fn check_hard_on(
    layout: &Layout,
    cs: &ConstraintSet,
    surfaces: &[Surface],
    params: &SolverParams,
    only: Option<usize>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let in_scope = |a: &AssetSpec| only.is_none_or(|k| a.surface_index == k);
    let mut rects: BTreeMap<&str, Rect> = BTreeMap::new();
    for a in cs.assets.iter().filter(|a| in_scope(a)) {
        match layout.get(&a.id) {
            Some(p) => {
                rects.insert(a.id.as_str(), footprint(a, p.x_cm, p.y_cm, p.orientation));
            }
            None => out.push(Violation { kind: ViolationKind::Containment, subjects: vec![a.id.clone()], magnitude: a.footprint_area() }),
        }
    }
    for a in cs.assets.iter().filter(|a| in_scope(a)) {
        let Some(r) = rects.get(a.id.as_str()) else { continue };
        let Some(surface) = surfaces.get(a.surface_index) else {
            out.push(Violation { kind: ViolationKind::Containment, subjects: vec![a.id.clone()], magnitude: a.footprint_area() });
            continue;
        };
        let stacked = cs.base_of(&a.id).is_some();
        if !stacked {
            let inflated = r.inflate(params.edge_margin_cm);
            if !footprint_contained(surface, &inflated) {
                let unsupported = surface.grid.unsupported_in(&inflated) as f64 * surface.grid.cell_area();
                let magnitude = (inflated.area_outside(&surface.bbox) + unsupported).max(EPS);
                out.push(Violation { kind: ViolationKind::Containment, subjects: vec![a.id.clone()], magnitude });
            }
        }
        if let Some(c) = surface.clearance_cm {
            let excess = stack_top(cs, &a.id) - c;
            if excess > EPS {
                out.push(Violation { kind: ViolationKind::Clearance, subjects: vec![a.id.clone()], magnitude: excess });
            }
        }
        if let Some(want) = cs.fixed_orientations.get(&a.id) {
            let got = layout.get(&a.id).expect("placed").orientation;
            if got != *want {
                let diff = (i64::from(got.yaw_deg()) - i64::from(want.yaw_deg())).rem_euclid(360);
                out.push(Violation {
                    kind: ViolationKind::Orientation,
                    subjects: vec![a.id.clone()],
                    magnitude: diff.min(360 - diff) as f64,
                });
            }
        }
    }
    // Pairwise non-overlap among assets at the same stack level of a surface.
    let placed: Vec<&AssetSpec> = cs.assets.iter().filter(|a| rects.contains_key(a.id.as_str())).collect();
    for (i, a) in placed.iter().enumerate() {
        for b in &placed[i + 1..] {
            if a.surface_index != b.surface_index || cs.stack_level(&a.id) != cs.stack_level(&b.id) {
                continue;
            }
            let area = rects[a.id.as_str()].intersection_area(&rects[b.id.as_str()]);
            if area > EPS {
                out.push(Violation { kind: ViolationKind::Overlap, subjects: vec![a.id.clone(), b.id.clone()], magnitude: area });
            }
        }
    }
    for g in &cs.globals {
        let (Some(r), Some(a)) = (rects.get(g.subject.as_str()), cs.asset(&g.subject)) else { continue };
        let Some(surface) = surfaces.get(a.surface_index) else { continue };
        let (cx, cy) = r.center();
        let ok = region_in_bbox(&surface.bbox, cx, cy).is_ok_and(|got| got == g.region);
        if !ok {
            let cell = g.region.rect(&surface.bbox);
            let dx = (cell.min_x - cx).max(cx - cell.max_x).max(0.0);
            let dy = (cell.min_y - cy).max(cy - cell.max_y).max(0.0);
            out.push(Violation { kind: ViolationKind::GlobalRegion, subjects: vec![g.subject.clone()], magnitude: dx.hypot(dy).max(EPS) });
        }
    }
    for h in &cs.hard_pairs {
        let (Some(s), Some(r)) = (rects.get(h.subject.as_str()), rects.get(h.reference.as_str())) else { continue };
        let excess = predicates::relation_excess(h.relation, s, r);
        if excess > EPS {
            let kind = if h.relation == PositionRelation::OnTopOf { ViolationKind::Stacking } else { ViolationKind::Relation };
            out.push(Violation { kind, subjects: vec![h.subject.clone(), h.reference.clone()], magnitude: excess });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile_plan;
    use crate::scene::{Direction, Orientation, PlanDirective, Placement, Region};

    fn spec(id: &str, w: f64, d: f64) -> AssetSpec {
        AssetSpec {
            id: id.into(),
            name: id.into(),
            width_cm: w,
            depth_cm: d,
            height_cm: 10.0,
            surface_index: 0,
            style: String::new(),
            material: String::new(),
        }
    }

    fn at(x: f64, y: f64) -> Placement {
        Placement { x_cm: x, y_cm: y, orientation: Orientation::default(), stack_base: None, z_cm: 75.0 }
    }

    fn surfaces() -> Vec<Surface> {
        vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 100.0, 100.0), 75.0, 1.0)]
    }

    fn layout(entries: &[(&str, Placement)]) -> Layout {
        let mut l = Layout::default();
        for (id, p) in entries {
            l.insert(*id, p.clone());
        }
        l
    }

    #[test]
    fn centered_single_asset_is_clean() {
        let s = vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 30.0, 30.0), 75.0, 1.0)];
        let cs = compile_plan(&[], &[spec("a", 20.0, 20.0)], &s).unwrap();
        assert!(check_hard(&layout(&[("a", at(15.0, 15.0))]), &cs, &s, &SolverParams::default()).is_empty());
    }

    #[test]
    fn overlap_area_of_offset_squares() {
        let cs = compile_plan(&[], &[spec("a", 20.0, 20.0), spec("b", 20.0, 20.0)], &surfaces()).unwrap();
        let v = check_hard(&layout(&[("a", at(40.0, 50.0)), ("b", at(55.0, 50.0))]), &cs, &surfaces(), &SolverParams::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Overlap);
        assert!((v[0].magnitude - 100.0).abs() < 1e-9);
    }

    #[test]
    fn left_of_one_cm_past() {
        let d = vec![PlanDirective::RelativePosition { subject: "a".into(), reference: "b".into(), relation: PositionRelation::LeftOf }];
        let cs = compile_plan(&d, &[spec("a", 10.0, 10.0), spec("b", 10.0, 10.0)], &surfaces()).unwrap();
        let v = check_hard(&layout(&[("a", at(40.0, 20.0)), ("b", at(49.0, 60.0))]), &cs, &surfaces(), &SolverParams::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Relation);
        assert!((v[0].magnitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn containment_margin() {
        let cs = compile_plan(&[], &[spec("a", 10.0, 10.0)], &surfaces()).unwrap();
        let p = SolverParams::default();
        // Edge flush with the bbox: fine at margin 0, violating at margin 1.
        let l = layout(&[("a", at(5.0, 50.0))]);
        assert_eq!(check_hard(&l, &cs, &surfaces(), &p)[0].kind, ViolationKind::Containment);
        assert!(check_hard(&l, &cs, &surfaces(), &SolverParams { edge_margin_cm: 0.0, ..p.clone() }).is_empty());
        assert!(check_hard(&layout(&[("a", at(6.0, 50.0))]), &cs, &surfaces(), &p).is_empty());
    }

    #[test]
    fn region_tie_goes_west() {
        let d = vec![PlanDirective::GlobalRegion { subject: "a".into(), region: Region::C }];
        let s = vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 90.0, 90.0), 75.0, 1.0)];
        let cs = compile_plan(&d, &[spec("a", 4.0, 4.0)], &s).unwrap();
        let p = SolverParams::default();
        let v = check_hard(&layout(&[("a", at(30.0, 45.0))]), &cs, &s, &p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::GlobalRegion);
        assert!(check_hard(&layout(&[("a", at(31.0, 45.0))]), &cs, &s, &p).is_empty());
        assert!(check_hard(&layout(&[("a", at(60.0, 60.0))]), &cs, &s, &p).is_empty());
    }

    #[test]
    fn stacking_and_fixed_orientation() {
        let d = vec![
            PlanDirective::RelativePosition { subject: "lamp".into(), reference: "box".into(), relation: PositionRelation::OnTopOf },
            PlanDirective::Orientation { subject: "box".into(), direction: Direction::Forward },
        ];
        let cs = compile_plan(&d, &[spec("lamp", 10.0, 10.0), spec("box", 20.0, 20.0)], &surfaces()).unwrap();
        let p = SolverParams::default();
        let mut l = layout(&[("box", at(50.0, 50.0)), ("lamp", at(50.0, 50.0))]);
        assert!(check_hard(&l, &cs, &surfaces(), &p).is_empty());
        l.insert("lamp", at(58.0, 50.0));
        let v = check_hard(&l, &cs, &surfaces(), &p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Stacking);
        assert!((v[0].magnitude - 30.0).abs() < 1e-9);
        l.insert("lamp", at(50.0, 50.0));
        l.placements.get_mut("box").unwrap().orientation = Direction::Left.orientation();
        assert_eq!(check_hard(&l, &cs, &surfaces(), &p)[0].kind, ViolationKind::Orientation);
    }

    #[test]
    fn soft_score_examples() {
        let d = vec![PlanDirective::Distance { subject: "a".into(), reference: "b".into(), relation: crate::scene::DistanceRelation::Near }];
        let cs = compile_plan(&d, &[spec("a", 10.0, 10.0), spec("b", 10.0, 10.0)], &surfaces()).unwrap();
        let p = SolverParams::default();
        let touching = layout(&[("a", at(20.0, 20.0)), ("b", at(30.0, 20.0))]);
        assert!((soft_score(&touching, &cs, &p).unwrap() - 1.0).abs() < 1e-9);
        let apart = layout(&[("a", at(20.0, 20.0)), ("b", at(45.0, 20.0))]);
        assert!(soft_score(&apart, &cs, &p).unwrap().abs() < 1e-9);
        assert!(matches!(soft_score(&layout(&[("a", at(0.0, 0.0))]), &cs, &p), Err(OptimizerError::MissingAsset(_))));
    }

    #[test]
    fn clearance_is_checked_for_the_stack() {
        let mut s = surfaces();
        s[0].clearance_cm = Some(15.0);
        let d = vec![PlanDirective::RelativePosition { subject: "lamp".into(), reference: "box".into(), relation: PositionRelation::OnTopOf }];
        let cs = compile_plan(&d, &[spec("lamp", 10.0, 10.0), spec("box", 20.0, 20.0)], &s).unwrap();
        let v = check_hard(&layout(&[("box", at(50.0, 50.0)), ("lamp", at(50.0, 50.0))]), &cs, &s, &SolverParams::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Clearance);
        assert!((v[0].magnitude - 5.0).abs() < 1e-9);
    }

    #[test]
    fn params_are_validated() {
        assert!(SolverParams::default().validate().is_ok());
        assert!(SolverParams { cooling: 1.0, ..Default::default() }.validate().is_err());
        assert!(SolverParams { grid_step_cm: 0.0, ..Default::default() }.validate().is_err());
    }
}
