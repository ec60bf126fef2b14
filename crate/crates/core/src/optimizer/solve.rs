use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::compiler::{construction_order, ConstraintSet, SoftTerm};
use crate::geometry::{footprint_contained, Rect, Surface};
use crate::scene::{footprint, region_in_bbox, AssetSpec, Layout, Orientation, Placement, PositionRelation, Region};

use super::predicates::{anchor_score, relation_excess, soft_term_score};
use super::{check_hard_on, stack_top, OptimizerError, SolverParams};

const EPS: f64 = 1e-9;
const TIE: f64 = 1e-12;

/// Pre-edit state handed to the solver when re-solving a surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    /// Previous placements, tried first during constructive placement.
    pub seeds: BTreeMap<String, Placement>,
    /// Assets pulled toward their seed position by the anchor term.
    pub anchors: BTreeSet<String>,
}

/// Lattice candidate. The derived order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cand {
    iy: usize,
    ix: usize,
    o: usize,
}

struct Problem<'a> {
    surface: &'a Surface,
    params: &'a SolverParams,
    ids: Vec<String>,
    specs: Vec<&'a AssetSpec>,
    base: Vec<Option<usize>>,
    level: Vec<usize>,
    chain: Vec<Vec<usize>>,
    /// Quarter turns tried during construction (one per distinct footprint).
    orientations: Vec<Vec<usize>>,
    /// Quarter turns permitted at all.
    allowed: Vec<Vec<usize>>,
    global: Vec<Option<Region>>,
    clearance_ok: Vec<bool>,
    stack_height: Vec<f64>,
    /// Per asset: (other, subject is this asset, relation).
    hard_of: Vec<Vec<(usize, bool, PositionRelation)>>,
    soft: Vec<(usize, usize, SoftTerm)>,
    soft_of: Vec<Vec<usize>>,
    anchor: Vec<Option<(f64, f64)>>,
    seed: Vec<Option<Cand>>,
    nx: usize,
    ny: usize,
    step: f64,
    static_ok: Vec<Vec<bool>>,
}

/// Why constructive placement stopped.
struct Failure {
    asset: usize,
    depth: usize,
}

impl<'a> Problem<'a> {
    fn new(
        cs: &'a ConstraintSet,
        surface: &'a Surface,
        order: &[String],
        params: &'a SolverParams,
        warm: Option<&WarmStart>,
    ) -> Result<Self, OptimizerError> {
        let index: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let n = order.len();
        let specs: Vec<&AssetSpec> = order
            .iter()
            .map(|id| cs.asset(id).ok_or_else(|| OptimizerError::MissingAsset(id.clone())))
            .collect::<Result<_, _>>()?;
        let base: Vec<Option<usize>> =
            order.iter().map(|id| cs.base_of(id).and_then(|b| index.get(b).copied())).collect();
        let level: Vec<usize> = order.iter().map(|id| cs.stack_level(id)).collect();
        let mut children = vec![Vec::new(); n];
        for (i, b) in base.iter().enumerate() {
            if let Some(b) = b {
                children[*b].push(i);
            }
        }
        let chain = (0..n)
            .map(|i| {
                let mut out = vec![i];
                let mut k = 0;
                while k < out.len() {
                    out.extend(children[out[k]].iter().copied());
                    k += 1;
                }
                out
            })
            .collect();
        let orientations = specs
            .iter()
            .zip(order)
            .map(|(s, id)| match cs.fixed_orientations.get(id) {
                Some(o) => vec![o.quarter_turns()],
                None if s.width_cm == s.depth_cm => vec![0],
                None => vec![0, 1],
            })
            .collect();
        let allowed = order
            .iter()
            .map(|id| match cs.fixed_orientations.get(id) {
                Some(o) => vec![o.quarter_turns()],
                None => vec![0, 1, 2, 3],
            })
            .collect();
        let mut global = vec![None; n];
        for g in &cs.globals {
            if let Some(&i) = index.get(g.subject.as_str()) {
                global[i] = Some(g.region);
            }
        }
        let stack_height: Vec<f64> = order.iter().map(|id| stack_top(cs, id)).collect();
        let clearance_ok = stack_height.iter().map(|h| surface.clearance_cm.is_none_or(|c| h - c <= EPS)).collect();
        let mut hard_of = vec![Vec::new(); n];
        for h in &cs.hard_pairs {
            if let (Some(&s), Some(&r)) = (index.get(h.subject.as_str()), index.get(h.reference.as_str())) {
                hard_of[s].push((r, true, h.relation));
                hard_of[r].push((s, false, h.relation));
            }
        }
        let mut soft = Vec::new();
        let mut soft_of = vec![Vec::new(); n];
        for p in &cs.soft_pairs {
            if let (Some(&s), Some(&r)) = (index.get(p.subject.as_str()), index.get(p.reference.as_str())) {
                soft_of[s].push(soft.len());
                soft_of[r].push(soft.len());
                soft.push((s, r, p.term));
            }
        }
        let step = params.grid_step_cm;
        let nx = (surface.bbox.width() / step + EPS).floor() as usize + 1;
        let ny = (surface.bbox.depth() / step + EPS).floor() as usize + 1;
        let mut anchor = vec![None; n];
        let mut seed = vec![None; n];
        if let Some(w) = warm {
            for (i, id) in order.iter().enumerate() {
                let Some(p) = w.seeds.get(id) else { continue };
                if w.anchors.contains(id) {
                    anchor[i] = Some((p.x_cm, p.y_cm));
                }
                let ix = ((p.x_cm - surface.bbox.min_x) / step).round();
                let iy = ((p.y_cm - surface.bbox.min_y) / step).round();
                if ix >= 0.0 && iy >= 0.0 && (ix as usize) < nx && (iy as usize) < ny {
                    let o = cs.fixed_orientations.get(id).copied().unwrap_or(p.orientation).quarter_turns();
                    seed[i] = Some(Cand { iy: iy as usize, ix: ix as usize, o });
                }
            }
        }
        let mut p = Self {
            surface,
            params,
            ids: order.to_vec(),
            specs,
            base,
            level,
            chain,
            orientations,
            allowed,
            global,
            clearance_ok,
            stack_height,
            hard_of,
            soft,
            soft_of,
            anchor,
            seed,
            nx,
            ny,
            step,
            static_ok: Vec::new(),
        };
        p.static_ok = (0..n).map(|i| p.unary_table(i)).collect();
        Ok(p)
    }

    fn n(&self) -> usize {
        self.ids.len()
    }

    fn slot(&self, c: Cand) -> usize {
        (c.o * self.ny + c.iy) * self.nx + c.ix
    }

    fn xy(&self, c: Cand) -> (f64, f64) {
        (self.surface.bbox.min_x + c.ix as f64 * self.step, self.surface.bbox.min_y + c.iy as f64 * self.step)
    }

    fn rect(&self, i: usize, c: Cand) -> Rect {
        let (x, y) = self.xy(c);
        footprint(self.specs[i], x, y, Orientation::from_quarter_turns(c.o))
    }

    /// Checks that depend on this asset alone: containment, region,
    /// clearance and fixed orientation.
    fn unary_table(&self, i: usize) -> Vec<bool> {
        let mut t = vec![false; 4 * self.nx * self.ny];
        if !self.clearance_ok[i] {
            return t;
        }
        for &o in &self.allowed[i] {
            for iy in 0..self.ny {
                for ix in 0..self.nx {
                    let c = Cand { iy, ix, o };
                    let slot = self.slot(c);
                    t[slot] = self.base[i].is_some() || self.unary_level0(i, c);
                }
            }
        }
        t
    }

    fn unary_level0(&self, i: usize, c: Cand) -> bool {
        let r = self.rect(i, c);
        if !footprint_contained(self.surface, &r.inflate(self.params.edge_margin_cm)) {
            return false;
        }
        match self.global[i] {
            Some(want) => {
                let (cx, cy) = r.center();
                region_in_bbox(&self.surface.bbox, cx, cy).is_ok_and(|got| got == want)
            }
            None => true,
        }
    }

    /// Pairwise hard checks between `i` at `ci` and `j` at `cj`. Returns the
    /// failing relation (or `None` for an overlap) on failure.
    fn pair_conflict(&self, i: usize, ci: Cand, j: usize, cj: Cand) -> Option<Option<PositionRelation>> {
        let ri = self.rect(i, ci);
        let rj = self.rect(j, cj);
        if self.level[i] == self.level[j] && ri.intersection_area(&rj) > EPS {
            return Some(None);
        }
        for &(other, subject, rel) in &self.hard_of[i] {
            if other != j {
                continue;
            }
            let excess = if subject { relation_excess(rel, &ri, &rj) } else { relation_excess(rel, &rj, &ri) };
            if excess > EPS {
                return Some(Some(rel));
            }
        }
        None
    }

    fn feasible(&self, i: usize, c: Cand, state: &[Option<Cand>]) -> bool {
        self.static_ok[i][self.slot(c)]
            && state
                .iter()
                .enumerate()
                .all(|(j, cj)| j == i || cj.is_none_or(|cj| self.pair_conflict(i, c, j, cj).is_none()))
    }

    fn anchor_term(&self, i: usize, c: Cand) -> f64 {
        match self.anchor[i] {
            Some((ax, ay)) => {
                let (x, y) = self.xy(c);
                self.params.anchor_weight * anchor_score((x - ax).hypot(y - ay), self.params.anchor_radius_cm)
            }
            None => 0.0,
        }
    }

    fn term(&self, t: usize, state: &[Option<Cand>]) -> Option<f64> {
        let (s, r, term) = self.soft[t];
        let (cs, cr) = (state[s]?, state[r]?);
        Some(soft_term_score(term, &self.rect(s, cs), &self.rect(r, cr), self.params))
    }

    /// Score gained by placing `i` at `c` given the assets already placed.
    fn partial(&self, i: usize, c: Cand, state: &mut [Option<Cand>]) -> f64 {
        let prev = state[i].replace(c);
        let s: f64 = self.soft_of[i].iter().filter_map(|&t| self.term(t, state)).sum();
        state[i] = prev;
        s + self.anchor_term(i, c)
    }

    fn objective(&self, state: &[Option<Cand>]) -> f64 {
        let soft: f64 = (0..self.soft.len()).filter_map(|t| self.term(t, state)).sum();
        let anchors: f64 = state.iter().enumerate().filter_map(|(i, c)| c.map(|c| self.anchor_term(i, c))).sum();
        soft + anchors
    }

    /// Lattice index range whose centres keep a stacked asset over its base.
    fn index_range(&self, i: usize, o: usize, state: &[Option<Cand>]) -> (usize, usize, usize, usize) {
        let Some(b) = self.base[i] else { return (0, self.nx - 1, 0, self.ny - 1) };
        let Some(cb) = state[b] else { return (0, self.nx - 1, 0, self.ny - 1) };
        let br = self.rect(b, cb);
        let (w, d) = Orientation::from_quarter_turns(o).extents(self.specs[i].width_cm, self.specs[i].depth_cm);
        let lo = |v: f64, origin: f64| (((v - origin) / self.step) - EPS).ceil().max(0.0) as usize;
        let hi = |v: f64, origin: f64, n: usize| {
            let h = (((v - origin) / self.step) + EPS).floor();
            if h < 0.0 {
                None
            } else {
                Some((h as usize).min(n - 1))
            }
        };
        let (ox, oy) = (self.surface.bbox.min_x, self.surface.bbox.min_y);
        match (hi(br.max_x - w / 2.0, ox, self.nx), hi(br.max_y - d / 2.0, oy, self.ny)) {
            (Some(x1), Some(y1)) => (lo(br.min_x + w / 2.0, ox), x1, lo(br.min_y + d / 2.0, oy), y1),
            _ => (1, 0, 1, 0),
        }
    }

    /// Best feasible candidates for asset `i`, at most `width`, with a
    /// feasible warm-start seed first.
    fn candidates(&self, i: usize, state: &mut [Option<Cand>], packing: bool, width: usize) -> Vec<Cand> {
        let k = width;
        let mut out: Vec<Cand> = Vec::new();
        if let Some(s) = self.seed[i] {
            if self.feasible(i, s, state) && self.forward_ok(i, s, state) {
                out.push(s);
            }
        }
        let mut top: Vec<(f64, Cand)> = Vec::new();
        let better = |a: (f64, Cand), b: (f64, Cand)| a.0 > b.0 + TIE || ((a.0 - b.0).abs() <= TIE && a.1 < b.1);
        let room = k.saturating_sub(out.len()).max(1);
        for &o in &self.orientations[i] {
            let (x0, x1, y0, y1) = self.index_range(i, o, state);
            for iy in y0..=y1.min(self.ny - 1) {
                if y0 > y1 {
                    break;
                }
                for ix in x0..=x1.min(self.nx - 1) {
                    if x0 > x1 {
                        break;
                    }
                    let c = Cand { iy, ix, o };
                    if !self.static_ok[i][self.slot(c)] || out.first() == Some(&c) {
                        continue;
                    }
                    let score = if packing { 0.0 } else { self.partial(i, c, state) };
                    if top.len() == room && !better((score, c), top[room - 1]) {
                        continue;
                    }
                    if !self.feasible(i, c, state) || !self.forward_ok(i, c, state) {
                        continue;
                    }
                    if room == usize::MAX {
                        top.push((score, c));
                        continue;
                    }
                    let pos = top.iter().position(|&t| better((score, c), t)).unwrap_or(top.len());
                    top.insert(pos, (score, c));
                    top.truncate(room);
                }
            }
        }
        if room == usize::MAX {
            top.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        }
        out.extend(top.into_iter().map(|(_, c)| c));
        out
    }

    /// Forward check: every unplaced asset sharing a hard relation with `i`
    /// keeps at least one feasible position once `i` sits at `c`.
    fn forward_ok(&self, i: usize, c: Cand, state: &mut [Option<Cand>]) -> bool {
        let prev = state[i].replace(c);
        let ok = self.hard_of[i].iter().filter(|(j, _, _)| state[*j].is_none()).all(|&(j, _, _)| self.has_position(j, state));
        state[i] = prev;
        ok
    }

    fn has_position(&self, j: usize, state: &[Option<Cand>]) -> bool {
        self.orientations[j].iter().any(|&o| {
            let (x0, x1, y0, y1) = self.index_range(j, o, state);
            (y0..=y1.min(self.ny - 1)).any(|iy| {
                (x0..=x1.min(self.nx - 1)).any(|ix| {
                    let c = Cand { iy, ix, o };
                    self.static_ok[j][self.slot(c)] && self.feasible(j, c, state)
                })
            })
        })
    }

    fn construct(&self, packing: bool, width: usize) -> Result<Vec<Cand>, Failure> {
        let mut state = vec![None; self.n()];
        let mut budget = self.params.placement_budget.max(self.n());
        let mut fail = Failure { asset: 0, depth: 0 };
        if self.dfs(0, &mut state, &mut budget, packing, width, &mut fail) {
            Ok(state.into_iter().map(|c| c.expect("all placed")).collect())
        } else {
            Err(fail)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(&self, depth: usize, state: &mut Vec<Option<Cand>>, budget: &mut usize, packing: bool, width: usize, fail: &mut Failure) -> bool {
        if depth == self.n() {
            return true;
        }
        let cands = self.candidates(depth, state, packing, width);
        if cands.is_empty() {
            if depth >= fail.depth {
                *fail = Failure { asset: depth, depth };
            }
            return false;
        }
        for c in cands {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            state[depth] = Some(c);
            if self.dfs(depth + 1, state, budget, packing, width, fail) {
                return true;
            }
            state[depth] = None;
        }
        false
    }

    /// Human-readable reasons why asset `i` has no feasible position.
    fn diagnose(&self, i: usize, state: &[Option<Cand>]) -> Vec<String> {
        let spec = self.specs[i];
        if !self.clearance_ok[i] {
            return vec![format!(
                "clearance: stack height {:.1} cm exceeds the {:.1} cm free above the surface",
                self.stack_height[i],
                self.surface.clearance_cm.unwrap_or(f64::INFINITY)
            )];
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut any_static = false;
        for &o in &self.orientations[i] {
            for iy in 0..self.ny {
                for ix in 0..self.nx {
                    let c = Cand { iy, ix, o };
                    if !self.static_ok[i][self.slot(c)] {
                        continue;
                    }
                    any_static = true;
                    for (j, cj) in state.iter().enumerate() {
                        let Some(cj) = *cj else { continue };
                        if j == i {
                            continue;
                        }
                        if let Some(conflict) = self.pair_conflict(i, c, j, cj) {
                            let key = match conflict {
                                None => format!("overlap with `{}`", self.ids[j]),
                                Some(PositionRelation::OnTopOf) => format!("stacking on `{}`", self.ids[j]),
                                Some(rel) => format!("relation {} with `{}`", relation_name(rel), self.ids[j]),
                            };
                            *counts.entry(key).or_default() += 1;
                            break;
                        }
                    }
                }
            }
        }
        if !any_static {
            let mut reasons = vec![format!(
                "containment: {:.1}×{:.1} cm footprint does not fit on the surface with a {} cm margin",
                spec.width_cm, spec.depth_cm, self.params.edge_margin_cm
            )];
            if let Some(r) = self.global[i] {
                reasons.push(format!("global_region: no supported position centred in region {r}"));
            }
            return reasons;
        }
        let mut ranked: Vec<(usize, String)> = counts.into_iter().map(|(k, v)| (v, k)).collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.into_iter().take(4).map(|(_, k)| k).collect()
    }

    fn anneal(&self, start: Vec<Cand>, rng: &mut ChaCha8Rng) -> Vec<Cand> {
        let n = self.n();
        if n == 0 || (self.soft.is_empty() && self.anchor.iter().all(Option::is_none)) {
            return start;
        }
        let normal = Normal::new(0.0, self.params.jitter_sigma_cm).expect("positive sigma");
        let free: Vec<usize> = (0..n).filter(|&i| self.allowed[i].len() > 1).collect();
        let roots: Vec<usize> = (0..n).filter(|&i| self.base[i].is_none()).collect();
        let mut state: Vec<Option<Cand>> = start.into_iter().map(Some).collect();
        let mut cur = self.objective(&state);
        let mut best = state.clone();
        let mut best_score = cur;
        let mut t = self.params.t0;
        for _ in 0..self.params.anneal_iters {
            let mut next = state.clone();
            let moved = self.propose(&mut next, rng, &normal, &free, &roots);
            t *= self.params.cooling;
            let Some(moved) = moved else { continue };
            if !moved.iter().all(|&m| self.feasible(m, next[m].expect("placed"), &next)) {
                continue;
            }
            let score = self.objective(&next);
            let delta = score - cur;
            if delta >= 0.0 || rng.random::<f64>() < (delta / t).exp() {
                state = next;
                cur = score;
                if cur > best_score + TIE {
                    best = state.clone();
                    best_score = cur;
                }
            }
        }
        best.into_iter().map(|c| c.expect("placed")).collect()
    }

    /// Applies a random move to `next`; returns the moved assets, or `None`
    /// when the move leaves the lattice or is not applicable.
    fn propose(
        &self,
        next: &mut [Option<Cand>],
        rng: &mut ChaCha8Rng,
        normal: &Normal<f64>,
        free: &[usize],
        roots: &[usize],
    ) -> Option<Vec<usize>> {
        let r: f64 = rng.random();
        if r < 0.6 {
            let i = rng.random_range(0..self.n());
            let mut dx = (normal.sample(rng) / self.step).round() as i64;
            let mut dy = (normal.sample(rng) / self.step).round() as i64;
            if dx == 0 && dy == 0 {
                let sign = if rng.random_bool(0.5) { 1 } else { -1 };
                if rng.random_bool(0.5) {
                    dx = sign;
                } else {
                    dy = sign;
                }
            }
            self.shift(next, i, dx, dy)?;
            Some(self.chain[i].clone())
        } else if r < 0.8 {
            if free.is_empty() {
                return None;
            }
            let i = free[rng.random_range(0..free.len())];
            let c = next[i].as_mut().expect("placed");
            c.o = (c.o + rng.random_range(1..4)) % 4;
            Some(vec![i])
        } else {
            if roots.len() < 2 {
                return None;
            }
            let a = roots[rng.random_range(0..roots.len())];
            let mut b = roots[rng.random_range(0..roots.len() - 1)];
            if b == a {
                b = roots[roots.len() - 1];
            }
            let (ca, cb) = (next[a]?, next[b]?);
            let dx = cb.ix as i64 - ca.ix as i64;
            let dy = cb.iy as i64 - ca.iy as i64;
            self.shift(next, a, dx, dy)?;
            self.shift(next, b, -dx, -dy)?;
            let mut moved = self.chain[a].clone();
            moved.extend(self.chain[b].iter().copied());
            Some(moved)
        }
    }

    fn shift(&self, next: &mut [Option<Cand>], i: usize, dx: i64, dy: i64) -> Option<()> {
        for &m in &self.chain[i] {
            let c = next[m].as_mut()?;
            let ix = c.ix as i64 + dx;
            let iy = c.iy as i64 + dy;
            if ix < 0 || iy < 0 || ix >= self.nx as i64 || iy >= self.ny as i64 {
                return None;
            }
            c.ix = ix as usize;
            c.iy = iy as usize;
        }
        Some(())
    }

    fn layout(&self, cands: &[Cand]) -> Layout {
        let mut layout = Layout::default();
        for (i, &c) in cands.iter().enumerate() {
            let (x, y) = self.xy(c);
            let mut z = self.surface.height_cm;
            let mut b = self.base[i];
            while let Some(j) = b {
                z += self.specs[j].height_cm;
                b = self.base[j];
            }
            layout.insert(
                self.ids[i].clone(),
                Placement {
                    x_cm: x,
                    y_cm: y,
                    orientation: Orientation::from_quarter_turns(c.o),
                    stack_base: self.base[i].map(|j| self.ids[j].clone()),
                    z_cm: z,
                },
            );
        }
        layout
    }

    /// Branching for the last packing pass: the whole lattice when it is
    /// small, a wider beam otherwise.
    fn wide_width(&self) -> usize {
        if self.nx * self.ny * 2 <= WIDE_LATTICE_CELLS {
            usize::MAX
        } else {
            4 * self.params.branch_width
        }
    }

    fn constructive(&self) -> Result<Vec<Cand>, OptimizerError> {
        let w = self.params.branch_width;
        match self.construct(false, w) {
            Ok(c) => Ok(c),
            // Fall back to pure packing, first narrow, then over the whole lattice.
            Err(first) => self.construct(true, w).or_else(|_| self.construct(true, self.wide_width())).map_err(|_| {
                let i = first.asset;
                let mut state = vec![None; self.n()];
                // Re-run greedily up to the failing asset to report its blockers.
                for j in 0..i {
                    state[j] = self.candidates(j, &mut state, false, 1).first().copied();
                }
                let mut reasons = self.diagnose(i, &state);
                if reasons.is_empty() {
                    reasons.push("search budget exhausted".into());
                }
                OptimizerError::Infeasible { asset: self.ids[i].clone(), surface: self.surface.index, reasons }
            }),
        }
    }
}

const WIDE_LATTICE_CELLS: usize = 4096;

fn relation_name(rel: PositionRelation) -> &'static str {
    match rel {
        PositionRelation::LeftOf => "left_of",
        PositionRelation::RightOf => "right_of",
        PositionRelation::InFrontOf => "in_front_of",
        PositionRelation::Behind => "behind",
        PositionRelation::OnTopOf => "on_top_of",
    }
}

fn surface_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn prepare<'a>(
    cs: &'a ConstraintSet,
    surfaces: &'a [Surface],
    k: usize,
    params: &'a SolverParams,
    warm: Option<&WarmStart>,
) -> Result<Option<Problem<'a>>, OptimizerError> {
    params.validate()?;
    let surface = surfaces.get(k).ok_or(OptimizerError::UnknownSurface(k))?;
    if let Some(a) = cs.assets.iter().find(|a| a.surface_index >= surfaces.len()) {
        return Err(OptimizerError::UnknownSurface(a.surface_index));
    }
    let orders = construction_order(cs);
    match orders.get(&k) {
        Some(order) if !order.is_empty() => Problem::new(cs, surface, order, params, warm).map(Some),
        _ => Ok(None),
    }
}

fn verified(layout: Layout, cs: &ConstraintSet, surfaces: &[Surface], params: &SolverParams, k: usize) -> Result<Layout, OptimizerError> {
    let v = check_hard_on(&layout, cs, surfaces, params, Some(k));
    if v.is_empty() {
        Ok(layout)
    } else {
        Err(OptimizerError::Unsafe(v))
    }
}

/// Solves one surface. The returned layout holds only that surface's assets.
pub fn solve_surface(
    cs: &ConstraintSet,
    surfaces: &[Surface],
    k: usize,
    params: &SolverParams,
    warm: Option<&WarmStart>,
) -> Result<Layout, OptimizerError> {
    let Some(p) = prepare(cs, surfaces, k, params, warm)? else { return Ok(Layout::default()) };
    let start = p.constructive()?;
    let mut rng = ChaCha8Rng::seed_from_u64(surface_seed(params.seed, k));
    let cands = p.anneal(start, &mut rng);
    verified(p.layout(&cands), cs, surfaces, params, k)
}

/// Solves every surface that carries assets, with an optional warm start.
pub fn solve_warm(
    cs: &ConstraintSet,
    surfaces: &[Surface],
    params: &SolverParams,
    warm: Option<&WarmStart>,
) -> Result<Layout, OptimizerError> {
    params.validate()?;
    let mut layout = Layout::default();
    for &k in cs.groups.keys() {
        layout.placements.extend(solve_surface(cs, surfaces, k, params, warm)?.placements);
    }
    Ok(layout)
}

pub fn solve(cs: &ConstraintSet, surfaces: &[Surface], params: &SolverParams) -> Result<Layout, OptimizerError> {
    solve_warm(cs, surfaces, params, None)
}

/// Constructive placement only, without annealing.
pub fn constructive(cs: &ConstraintSet, surfaces: &[Surface], params: &SolverParams) -> Result<Layout, OptimizerError> {
    params.validate()?;
    let mut layout = Layout::default();
    for &k in cs.groups.keys() {
        if let Some(p) = prepare(cs, surfaces, k, params, None)? {
            let cands = p.constructive()?;
            layout.placements.extend(verified(p.layout(&cands), cs, surfaces, params, k)?.placements);
        }
    }
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile_plan;
    use crate::optimizer::{check_hard, soft_score};
    use crate::scene::{AlignmentRelation, Direction, DistanceRelation, PlanDirective};
    use proptest::prelude::*;

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

    fn desk() -> Vec<Surface> {
        vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 120.0, 60.0), 75.0, 1.0)]
    }

    fn quick() -> SolverParams {
        SolverParams { anneal_iters: 3000, ..Default::default() }
    }

    fn trio() -> (Vec<AssetSpec>, Vec<PlanDirective>) {
        let assets = vec![spec("monitor", 55.0, 20.0), spec("keyboard", 44.0, 14.0), spec("mouse", 7.0, 11.0)];
        let d = vec![
            PlanDirective::GlobalRegion { subject: "monitor".into(), region: Region::C },
            PlanDirective::RelativePosition { subject: "keyboard".into(), reference: "monitor".into(), relation: PositionRelation::InFrontOf },
            PlanDirective::RelativePosition { subject: "mouse".into(), reference: "monitor".into(), relation: PositionRelation::RightOf },
            PlanDirective::Distance { subject: "mouse".into(), reference: "monitor".into(), relation: DistanceRelation::Near },
        ];
        (assets, d)
    }

    #[test]
    fn single_asset_without_directives() {
        let cs = compile_plan(&[], &[spec("a", 10.0, 10.0)], &desk()).unwrap();
        let l = solve(&cs, &desk(), &quick()).unwrap();
        assert_eq!(l.len(), 1);
        assert!(check_hard(&l, &cs, &desk(), &quick()).is_empty());
        assert_eq!(soft_score(&l, &cs, &quick()).unwrap(), 0.0);
    }

    #[test]
    fn worked_trio() {
        let (assets, d) = trio();
        let cs = compile_plan(&d, &assets, &desk()).unwrap();
        let p = quick();
        let l = solve(&cs, &desk(), &p).unwrap();
        assert!(check_hard(&l, &cs, &desk(), &p).is_empty());
        let r = |id: &str| footprint(cs.asset(id).unwrap(), l.get(id).unwrap().x_cm, l.get(id).unwrap().y_cm, l.get(id).unwrap().orientation);
        let (m, k, mo) = (r("monitor"), r("keyboard"), r("mouse"));
        assert!(k.max_y <= m.min_y + 1e-9);
        assert!(mo.min_x >= m.max_x - 1e-9);
        assert!(mo.gap(&m) < 15.0);
        assert!((soft_score(&l, &cs, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stacked_asset_rests_on_base() {
        let assets = vec![spec("box", 30.0, 30.0), spec("lamp", 10.0, 10.0), spec("cup", 8.0, 8.0)];
        let d = vec![
            PlanDirective::RelativePosition { subject: "lamp".into(), reference: "box".into(), relation: PositionRelation::OnTopOf },
            PlanDirective::Distance { subject: "cup".into(), reference: "box".into(), relation: DistanceRelation::Near },
        ];
        let cs = compile_plan(&d, &assets, &desk()).unwrap();
        let l = solve(&cs, &desk(), &quick()).unwrap();
        let lamp = l.get("lamp").unwrap();
        assert_eq!(lamp.stack_base.as_deref(), Some("box"));
        assert!((lamp.z_cm - 85.0).abs() < 1e-9);
        assert!(check_hard(&l, &cs, &desk(), &quick()).is_empty());
    }

    #[test]
    fn fixed_orientation_is_honoured() {
        let d = vec![PlanDirective::Orientation { subject: "a".into(), direction: Direction::Left }];
        let cs = compile_plan(&d, &[spec("a", 30.0, 10.0)], &desk()).unwrap();
        let l = solve(&cs, &desk(), &quick()).unwrap();
        assert_eq!(l.get("a").unwrap().orientation, Direction::Left.orientation());
    }

    #[test]
    fn oversized_asset_is_infeasible() {
        let cs = compile_plan(&[], &[spec("rug", 200.0, 10.0)], &desk()).unwrap();
        match solve(&cs, &desk(), &quick()) {
            Err(OptimizerError::Infeasible { asset, surface, reasons }) => {
                assert_eq!(asset, "rug");
                assert_eq!(surface, 0);
                assert!(reasons[0].starts_with("containment"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crowded_surface_names_the_blocker() {
        let s = vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 42.0, 22.0), 75.0, 1.0)];
        let cs = compile_plan(&[], &[spec("a", 30.0, 20.0), spec("b", 30.0, 20.0)], &s).unwrap();
        match solve(&cs, &s, &quick()) {
            Err(OptimizerError::Infeasible { reasons, .. }) => assert!(reasons.iter().any(|r| r.contains("overlap")), "{reasons:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clearance_blocks_tall_assets() {
        let mut s = desk();
        s[0].clearance_cm = Some(5.0);
        let cs = compile_plan(&[], &[spec("a", 10.0, 10.0)], &s).unwrap();
        match solve(&cs, &s, &quick()) {
            Err(OptimizerError::Infeasible { reasons, .. }) => assert!(reasons[0].starts_with("clearance")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn warm_start_keeps_anchored_assets() {
        let assets = vec![spec("a", 20.0, 20.0), spec("b", 10.0, 10.0)];
        let d = vec![PlanDirective::Alignment { subject: "b".into(), reference: "a".into(), relation: AlignmentRelation::HorizontalMid }];
        let cs = compile_plan(&d, &assets, &desk()).unwrap();
        let mut warm = WarmStart::default();
        let prev = Placement { x_cm: 30.0, y_cm: 20.0, orientation: Orientation::default(), stack_base: None, z_cm: 75.0 };
        warm.seeds.insert("a".into(), prev.clone());
        warm.anchors.insert("a".into());
        let l = solve_warm(&cs, &desk(), &quick(), Some(&warm)).unwrap();
        assert_eq!(l.get("a").unwrap().x_cm, 30.0);
        assert_eq!(l.get("a").unwrap().y_cm, 20.0);
    }

    #[test]
    fn annealing_never_loses_to_constructive() {
        let assets = vec![spec("a", 20.0, 10.0), spec("b", 10.0, 10.0), spec("c", 12.0, 6.0)];
        let d = vec![
            PlanDirective::Distance { subject: "b".into(), reference: "a".into(), relation: DistanceRelation::Far },
            PlanDirective::Alignment { subject: "c".into(), reference: "b".into(), relation: AlignmentRelation::VerticalRight },
            PlanDirective::Distance { subject: "c".into(), reference: "a".into(), relation: DistanceRelation::Near },
        ];
        let cs = compile_plan(&d, &assets, &desk()).unwrap();
        let p = quick();
        let base = soft_score(&constructive(&cs, &desk(), &p).unwrap(), &cs, &p).unwrap();
        let best = soft_score(&solve(&cs, &desk(), &p).unwrap(), &cs, &p).unwrap();
        assert!(best >= base - 1e-12);
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<AssetSpec>, Vec<PlanDirective>, u64)> {
        let sizes = proptest::collection::vec((4u32..30, 4u32..20), 2..5);
        (sizes, proptest::collection::vec((0usize..4, 0usize..4, 0usize..3), 0..4), any::<u64>()).prop_map(|(sizes, rels, seed)| {
            let assets: Vec<AssetSpec> =
                sizes.iter().enumerate().map(|(i, &(w, d))| spec(&format!("a{i}"), f64::from(w), f64::from(d))).collect();
            let n = assets.len();
            let d = rels
                .into_iter()
                .filter(|(s, r, _)| s % n != r % n)
                .map(|(s, r, k)| {
                    let (subject, reference) = (format!("a{}", s % n), format!("a{}", r % n));
                    match k {
                        0 => PlanDirective::Distance { subject, reference, relation: DistanceRelation::Near },
                        1 => PlanDirective::Distance { subject, reference, relation: DistanceRelation::Far },
                        _ => PlanDirective::Alignment { subject, reference, relation: AlignmentRelation::HorizontalFront },
                    }
                })
                .collect();
            (assets, d, seed)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solve_is_deterministic_and_safe((assets, d, seed) in arb_instance()) {
            let cs = compile_plan(&d, &assets, &desk()).unwrap();
            let p = SolverParams { seed, anneal_iters: 500, ..Default::default() };
            let a = solve(&cs, &desk(), &p).unwrap();
            let b = solve(&cs, &desk(), &p).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            prop_assert!(check_hard(&a, &cs, &desk(), &p).is_empty());
            let s = soft_score(&a, &cs, &p).unwrap();
            prop_assert!(s >= 0.0 && s <= cs.soft_pairs.len() as f64 + 1e-9);
        }

        #[test]
        fn constructive_is_translation_equivariant((assets, d, _) in arb_instance(), dx in -50i32..50, dy in -50i32..50) {
            let s0 = desk();
            let s1 = vec![s0[0].translated(f64::from(dx), f64::from(dy))];
            let cs = compile_plan(&d, &assets, &s0).unwrap();
            let p = SolverParams::default();
            let a = constructive(&cs, &s0, &p).unwrap();
            let b = constructive(&cs, &s1, &p).unwrap();
            for (id, pa) in &a.placements {
                let pb = b.get(id).unwrap();
                prop_assert!((pa.x_cm + f64::from(dx) - pb.x_cm).abs() < 1e-9);
                prop_assert!((pa.y_cm + f64::from(dy) - pb.y_cm).abs() < 1e-9);
                prop_assert_eq!(pa.orientation, pb.orientation);
            }
        }
    }
}
