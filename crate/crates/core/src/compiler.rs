//! Turns validated plan directives into the constraint buckets the optimizer
//! consumes, and orders assets for constructive placement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Surface;
use crate::scene::{
    AlignmentRelation, AssetSpec, DistanceRelation, Orientation, PlanDirective, PositionRelation, Region,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftTerm {
    Distance(DistanceRelation),
    Alignment(AlignmentRelation),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SoftPair {
    pub subject: String,
    pub reference: String,
    pub term: SoftTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HardPair {
    pub subject: String,
    pub reference: String,
    pub relation: PositionRelation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalPlacement {
    pub subject: String,
    pub region: Region,
}

/// Compiled scene graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub assets: Vec<AssetSpec>,
    /// Distance and alignment directives (objective terms).
    pub soft_pairs: Vec<SoftPair>,
    /// Relative-position directives, `on_top_of` included.
    pub hard_pairs: Vec<HardPair>,
    pub globals: Vec<GlobalPlacement>,
    pub fixed_orientations: BTreeMap<String, Orientation>,
    /// Stacked subject → base.
    pub stacks: BTreeMap<String, String>,
    /// Surface index → asset ids, ordered by id.
    pub groups: BTreeMap<usize, Vec<String>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset `{asset}` references surface {surface}, which does not exist")]
    UnknownSurface { asset: String, surface: usize },
    #[error("`{subject}` and `{reference}` are on different surfaces")]
    CrossSurface { subject: String, reference: String },
    #[error("`{0}` is placed on top of another asset and cannot have a global region")]
    StackedGlobal(String),
    #[error("`{0}` rests on more than one base")]
    MultipleBases(String),
    #[error("on_top_of relations form a cycle through `{0}`")]
    StackCycle(String),
    #[error("`{0}` refers to itself")]
    SelfReference(String),
    #[error("`{0}` has more than one {1} directive")]
    Duplicate(String, &'static str),
}

impl ConstraintSet {
    pub fn asset(&self, id: &str) -> Option<&AssetSpec> {
        self.assets.iter().find(|a| a.id == id)
    }

    /// Number of directives the set was compiled from.
    pub fn directive_count(&self) -> usize {
        self.soft_pairs.len() + self.hard_pairs.len() + self.globals.len() + self.fixed_orientations.len()
    }

    /// Base of `id` when it is stacked.
    pub fn base_of(&self, id: &str) -> Option<&str> {
        self.stacks.get(id).map(String::as_str)
    }

    /// Number of assets below `id` in its stack chain.
    pub fn stack_level(&self, id: &str) -> usize {
        let mut level = 0;
        let mut cur = id;
        while let Some(b) = self.base_of(cur) {
            level += 1;
            cur = b;
            if level > self.assets.len() {
                break;
            }
        }
        level
    }

    /// Directives rebuilt from the buckets, in a canonical order.
    pub fn directives(&self) -> Vec<PlanDirective> {
        let mut out: Vec<PlanDirective> = Vec::new();
        out.extend(self.globals.iter().map(|g| PlanDirective::GlobalRegion { subject: g.subject.clone(), region: g.region }));
        out.extend(self.hard_pairs.iter().map(|h| PlanDirective::RelativePosition {
            subject: h.subject.clone(),
            reference: h.reference.clone(),
            relation: h.relation,
        }));
        out.extend(self.soft_pairs.iter().map(|s| match s.term {
            SoftTerm::Distance(relation) => {
                PlanDirective::Distance { subject: s.subject.clone(), reference: s.reference.clone(), relation }
            }
            SoftTerm::Alignment(relation) => {
                PlanDirective::Alignment { subject: s.subject.clone(), reference: s.reference.clone(), relation }
            }
        }));
        out.extend(
            self.fixed_orientations
                .iter()
                .map(|(id, o)| PlanDirective::Orientation { subject: id.clone(), direction: o.direction() }),
        );
        out
    }

    /// Pretty JSON dump for inspection tools.
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraint set serializes")
    }
}

/// Sorts directives into buckets. Distance and alignment are soft; every
/// other relative placement is hard.
pub fn compile_plan(directives: &[PlanDirective], assets: &[AssetSpec], surfaces: &[Surface]) -> Result<ConstraintSet, CompileError> {
    let by_id: BTreeMap<&str, &AssetSpec> = assets.iter().map(|a| (a.id.as_str(), a)).collect();
    for a in assets {
        if a.surface_index >= surfaces.len() {
            return Err(CompileError::UnknownSurface { asset: a.id.clone(), surface: a.surface_index });
        }
    }
    let mut cs = ConstraintSet {
        assets: assets.to_vec(),
        soft_pairs: Vec::new(),
        hard_pairs: Vec::new(),
        globals: Vec::new(),
        fixed_orientations: BTreeMap::new(),
        stacks: BTreeMap::new(),
        groups: BTreeMap::new(),
    };
    for a in assets {
        cs.groups.entry(a.surface_index).or_default().push(a.id.clone());
    }
    for ids in cs.groups.values_mut() {
        ids.sort();
    }
    for d in directives {
        let subject = d.subject();
        let s = by_id.get(subject).ok_or_else(|| CompileError::UnknownAsset(subject.to_string()))?;
        if let Some(r) = d.reference() {
            let ra = by_id.get(r).ok_or_else(|| CompileError::UnknownAsset(r.to_string()))?;
            if r == subject {
                return Err(CompileError::SelfReference(subject.to_string()));
            }
            if ra.surface_index != s.surface_index {
                return Err(CompileError::CrossSurface { subject: subject.to_string(), reference: r.to_string() });
            }
        }
        match d {
            PlanDirective::GlobalRegion { subject, region } => {
                if cs.globals.iter().any(|g| &g.subject == subject) {
                    return Err(CompileError::Duplicate(subject.clone(), "global_region"));
                }
                cs.globals.push(GlobalPlacement { subject: subject.clone(), region: *region });
            }
            PlanDirective::RelativePosition { subject, reference, relation } => {
                if *relation == PositionRelation::OnTopOf {
                    if cs.stacks.insert(subject.clone(), reference.clone()).is_some() {
                        return Err(CompileError::MultipleBases(subject.clone()));
                    }
                }
                cs.hard_pairs.push(HardPair { subject: subject.clone(), reference: reference.clone(), relation: *relation });
            }
            PlanDirective::Distance { subject, reference, relation } => cs.soft_pairs.push(SoftPair {
                subject: subject.clone(),
                reference: reference.clone(),
                term: SoftTerm::Distance(*relation),
            }),
            PlanDirective::Alignment { subject, reference, relation } => cs.soft_pairs.push(SoftPair {
                subject: subject.clone(),
                reference: reference.clone(),
                term: SoftTerm::Alignment(*relation),
            }),
            PlanDirective::Orientation { subject, direction } => {
                if cs.fixed_orientations.insert(subject.clone(), direction.orientation()).is_some() {
                    return Err(CompileError::Duplicate(subject.clone(), "orientation"));
                }
            }
        }
    }
    for g in &cs.globals {
        if cs.stacks.contains_key(&g.subject) {
            return Err(CompileError::StackedGlobal(g.subject.clone()));
        }
    }
    for start in cs.stacks.keys() {
        let mut seen = BTreeSet::new();
        let mut cur = start.as_str();
        while let Some(b) = cs.stacks.get(cur) {
            if !seen.insert(cur) {
                return Err(CompileError::StackCycle(start.clone()));
            }
            cur = b;
        }
    }
    Ok(cs)
}

/// Per-surface placement order: stack bases before their subjects and, when
/// the relation graph is acyclic, references before subjects. Ready assets
/// are taken by descending footprint area, then id. If non-stacking
/// relations form a cycle, they are dropped and only stacking edges remain.
pub fn construction_order(cs: &ConstraintSet) -> BTreeMap<usize, Vec<String>> {
    let mut out = BTreeMap::new();
    for (&k, ids) in &cs.groups {
        let members: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let stack_edges: Vec<(&str, &str)> = cs
            .stacks
            .iter()
            .filter(|(s, b)| members.contains(s.as_str()) && members.contains(b.as_str()))
            .map(|(s, b)| (b.as_str(), s.as_str()))
            .collect();
        let mut edges = stack_edges.clone();
        for h in &cs.hard_pairs {
            if h.relation != PositionRelation::OnTopOf && members.contains(h.subject.as_str()) {
                edges.push((h.reference.as_str(), h.subject.as_str()));
            }
        }
        for s in &cs.soft_pairs {
            if members.contains(s.subject.as_str()) {
                edges.push((s.reference.as_str(), s.subject.as_str()));
            }
        }
        let order = kahn(cs, ids, &edges).unwrap_or_else(|| kahn(cs, ids, &stack_edges).expect("stacking is acyclic"));
        out.insert(k, order);
    }
    out
}

fn kahn(cs: &ConstraintSet, ids: &[String], edges: &[(&str, &str)]) -> Option<Vec<String>> {
    let area = |id: &str| cs.asset(id).map_or(0.0, AssetSpec::footprint_area);
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|i| (i.as_str(), 0)).collect();
    let mut unique: BTreeSet<(&str, &str)> = BTreeSet::new();
    for &(from, to) in edges {
        if from != to && indegree.contains_key(from) && unique.insert((from, to)) {
            *indegree.get_mut(to)? += 1;
        }
    }
    let mut done = Vec::with_capacity(ids.len());
    while done.len() < ids.len() {
        let next = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .max_by(|a, b| area(a).total_cmp(&area(b)).then(b.cmp(a)))?;
        indegree.remove(next);
        for &(from, to) in &unique {
            if from == next {
                if let Some(d) = indegree.get_mut(to) {
                    *d -= 1;
                }
            }
        }
        done.push(next.to_string());
    }
    Some(done)
}
