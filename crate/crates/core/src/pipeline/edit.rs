//! Structured scene edits and their application with a surface-local re-solve.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::validate::{fits_within, validate_plan, validate_stack_clearance, ValidationReport, Violation};
use crate::compiler::compile_plan;
use crate::geometry::Surface;
use crate::optimizer::{check_hard, solve_surface, OptimizerError, WarmStart};
use crate::retrieval::{bind, Catalog};
use crate::scene::{next_asset_id, AssetDraft, AssetSpec, DecorScene, Orientation, PlanDirective, Placement};

use super::PipelineError;

/// Placeholder subject for directives attached to an inserted asset.
pub const NEW_ASSET: &str = "new";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    /// Adds an asset. Its directives use [`NEW_ASSET`] as subject.
    Insert {
        asset: AssetDraft,
        #[serde(default)]
        directives: Vec<PlanDirective>,
    },
    Remove { target: String },
    /// Swaps the target for a new asset on the same surface; directives
    /// mentioning the target carry over.
    Replace { target: String, asset: AssetDraft },
    Resize { target: String, width_cm: f64, depth_cm: f64, height_cm: f64 },
    /// Replaces every directive whose subject is the target.
    Reposition {
        target: String,
        #[serde(default)]
        directives: Vec<PlanDirective>,
    },
    /// Sets an absolute orientation.
    Rotate { target: String, orientation: Orientation },
}

impl EditOp {
    pub fn target(&self) -> Option<&str> {
        match self {
            EditOp::Insert { .. } => None,
            EditOp::Remove { target }
            | EditOp::Replace { target, .. }
            | EditOp::Resize { target, .. }
            | EditOp::Reposition { target, .. }
            | EditOp::Rotate { target, .. } => Some(target),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EditOp::Insert { .. } => "insert",
            EditOp::Remove { .. } => "remove",
            EditOp::Replace { .. } => "replace",
            EditOp::Resize { .. } => "resize",
            EditOp::Reposition { .. } => "reposition",
            EditOp::Rotate { .. } => "rotate",
        }
    }
}

/// Body of an edit request: either operations or free text for the editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditRequest {
    Ops { ops: Vec<EditOp> },
    Instruction { instruction: String },
}

/// Reply of the edit stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditReply {
    pub ops: Vec<EditOp>,
    #[serde(default)]
    pub unresolved: Vec<String>,
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn check_draft(draft: &AssetDraft, surface: Option<&Surface>, at: &str, out: &mut Vec<Violation>) {
    if draft.name.trim().is_empty() {
        out.push(Violation::on("invalid_asset", at, "asset name is empty"));
    }
    if ![draft.width_cm, draft.depth_cm, draft.height_cm].into_iter().all(positive) {
        out.push(Violation::on("invalid_dims", at, "dimensions must be positive"));
        return;
    }
    let Some(s) = surface else {
        out.push(Violation::on("invalid_surface", at, format!("surface {} does not exist", draft.surface_index)));
        return;
    };
    if !fits_within(draft.width_cm, draft.depth_cm, s.bbox.width(), s.bbox.depth()) {
        out.push(Violation::on(
            "oversize",
            at,
            format!("{} x {} cm does not fit surface {} in any orientation", draft.width_cm, draft.depth_cm, s.index),
        ));
    }
    if let Some(c) = s.clearance_cm {
        if draft.height_cm > c {
            out.push(Violation::on("too_tall", at, format!("{} cm exceeds the {c} cm clearance", draft.height_cm)));
        }
    }
}

fn check_reference(d: &PlanDirective, live: &BTreeSet<String>, at: &str, out: &mut Vec<Violation>) {
    if let Some(r) = d.reference() {
        if !live.contains(r) {
            out.push(Violation::on("unknown_reference", at, format!("`{r}` is not in the scene")));
        }
    }
}

/// Static checks of an op list against `scene`. Ops apply in order, so a
/// target removed by an earlier op is unknown to later ones.
pub fn check_ops(scene: &DecorScene, ops: &[EditOp]) -> ValidationReport {
    let mut out = Vec::new();
    let mut live: BTreeSet<String> = scene.assets.iter().map(|a| a.id.clone()).collect();
    for (i, op) in ops.iter().enumerate() {
        let at = format!("ops[{i}]");
        if let Some(t) = op.target() {
            if !live.contains(t) {
                out.push(Violation::on("unknown_target", &at, format!("`{t}` is not in the scene")));
                continue;
            }
        }
        match op {
            EditOp::Insert { asset, directives } => {
                check_draft(asset, scene.surface(asset.surface_index), &at, &mut out);
                for d in directives {
                    if d.subject() != NEW_ASSET {
                        out.push(Violation::on("bad_subject", &at, format!("inserted directives must use `{NEW_ASSET}` as subject")));
                    }
                    check_reference(d, &live, &at, &mut out);
                }
            }
            EditOp::Remove { target } => {
                live.remove(target);
            }
            EditOp::Replace { target, asset } => {
                let k = scene.asset(target).map_or(0, |a| a.surface_index);
                let draft = AssetDraft { surface_index: k, ..asset.clone() };
                check_draft(&draft, scene.surface(k), &at, &mut out);
            }
            EditOp::Resize { width_cm, depth_cm, height_cm, .. } => {
                if ![*width_cm, *depth_cm, *height_cm].into_iter().all(positive) {
                    out.push(Violation::on("invalid_dims", &at, "dimensions must be positive"));
                }
            }
            EditOp::Reposition { target, directives } => {
                for d in directives {
                    if d.subject() != target {
                        out.push(Violation::on("bad_subject", &at, format!("directive subject must be `{target}`")));
                    }
                    check_reference(d, &live, &at, &mut out);
                }
            }
            EditOp::Rotate { .. } => {}
        }
    }
    ValidationReport::from_violations(out)
}

fn spec_from(draft: &AssetDraft, id: String, surface_index: usize) -> AssetSpec {
    AssetSpec {
        id,
        name: draft.name.trim().to_string(),
        width_cm: draft.width_cm,
        depth_cm: draft.depth_cm,
        height_cm: draft.height_cm,
        surface_index,
        style: draft.style.clone().unwrap_or_default(),
        material: draft.material.clone().unwrap_or_default(),
    }
}

/// Applies `ops` to a copy of `scene` and re-solves only the surfaces they
/// touch. Assets that were not edited are anchored to their previous spots;
/// placements on other surfaces are carried over unchanged. On any error
/// the input scene is left as it was.
pub fn apply_ops(scene: &DecorScene, ops: &[EditOp], catalog: Option<&Catalog>, top_k: usize) -> Result<DecorScene, PipelineError> {
    let report = check_ops(scene, ops);
    if !report.ok {
        return Err(PipelineError::InvalidEdit(report));
    }
    if ops.is_empty() {
        return Err(PipelineError::InvalidRequest("no edit operations".into()));
    }
    let mut next = scene.clone();
    let mut seeds: BTreeMap<String, Placement> = scene.layout.placements.clone();
    let mut affected = BTreeSet::new();
    let mut moved = BTreeSet::new();
    let mut rebind = BTreeSet::new();
    let mut rescale = BTreeSet::new();

    for op in ops {
        match op {
            EditOp::Insert { asset, directives } => {
                let id = next_asset_id(&asset.name, next.assets.iter().map(|a| a.id.as_str()));
                next.assets.push(spec_from(asset, id.clone(), asset.surface_index));
                for d in directives {
                    let mut d = d.clone();
                    d.rename(NEW_ASSET, &id);
                    next.directives.push(d);
                }
                affected.insert(asset.surface_index);
                moved.insert(id.clone());
                rebind.insert(id);
            }
            EditOp::Remove { target } => {
                let i = position(&next, target)?;
                let a = next.assets.remove(i);
                affected.insert(a.surface_index);
                next.directives.retain(|d| !d.mentions(target));
                next.layout.placements.remove(target);
                next.bindings.remove(target);
                seeds.remove(target);
            }
            EditOp::Replace { target, asset } => {
                let i = position(&next, target)?;
                let k = next.assets[i].surface_index;
                let id = next_asset_id(&asset.name, next.assets.iter().map(|a| a.id.as_str()).filter(|id| id != target));
                next.assets[i] = spec_from(asset, id.clone(), k);
                for d in &mut next.directives {
                    d.rename(target, &id);
                }
                if let Some(p) = seeds.remove(target) {
                    seeds.insert(id.clone(), p);
                }
                next.layout.placements.remove(target);
                next.bindings.remove(target);
                rescale.remove(target);
                affected.insert(k);
                moved.insert(id.clone());
                rebind.insert(id);
            }
            EditOp::Resize { target, width_cm, depth_cm, height_cm } => {
                let i = position(&next, target)?;
                let a = &mut next.assets[i];
                (a.width_cm, a.depth_cm, a.height_cm) = (*width_cm, *depth_cm, *height_cm);
                affected.insert(a.surface_index);
                moved.insert(target.clone());
                rescale.insert(target.clone());
            }
            EditOp::Reposition { target, directives } => {
                let i = position(&next, target)?;
                affected.insert(next.assets[i].surface_index);
                next.directives.retain(|d| d.subject() != target);
                next.directives.extend(directives.iter().cloned());
                moved.insert(target.clone());
            }
            EditOp::Rotate { target, orientation } => {
                let i = position(&next, target)?;
                affected.insert(next.assets[i].surface_index);
                next.directives.retain(|d| !(matches!(d, PlanDirective::Orientation { .. }) && d.subject() == target));
                next.directives.push(PlanDirective::Orientation { subject: target.clone(), direction: orientation.direction() });
            }
        }
    }

    let mut report = validate_plan(&next.directives, &next.assets);
    report.violations.extend(validate_stack_clearance(&next.directives, &next.assets, &next.furniture.surfaces).violations);
    if !report.violations.is_empty() {
        return Err(PipelineError::InvalidEdit(ValidationReport::from_violations(report.violations)));
    }

    let surfaces = &next.furniture.surfaces;
    let cs = compile_plan(&next.directives, &next.assets, surfaces)?;
    let mut params = next.provenance.solver.clone();
    params.seed = next.provenance.seed;
    for &k in &affected {
        let on_k: BTreeSet<&str> = next.assets.iter().filter(|a| a.surface_index == k).map(|a| a.id.as_str()).collect();
        let warm = WarmStart {
            seeds: seeds.iter().filter(|(id, _)| on_k.contains(id.as_str())).map(|(id, p)| (id.clone(), p.clone())).collect(),
            anchors: on_k.iter().filter(|id| !moved.contains(**id) && seeds.contains_key(**id)).map(|id| id.to_string()).collect(),
        };
        let solved = solve_surface(&cs, surfaces, k, &params, Some(&warm))?;
        next.layout.placements.retain(|id, _| !on_k.contains(id.as_str()));
        next.layout.placements.extend(solved.placements);
    }
    let live: BTreeSet<&str> = next.assets.iter().map(|a| a.id.as_str()).collect();
    next.layout.placements.retain(|id, _| live.contains(id.as_str()));

    let violations = check_hard(&next.layout, &cs, surfaces, &params);
    if !violations.is_empty() {
        return Err(OptimizerError::Unsafe(violations).into());
    }

    if let Some(catalog) = catalog {
        for id in &rebind {
            let a = next.asset(id).expect("inserted asset exists");
            let b = bind(a, catalog, top_k, next.provenance.seed)?;
            next.bindings.insert(id.clone(), b);
        }
        for id in &rescale {
            let a = next.asset(id).expect("resized asset exists").clone();
            if let Some(b) = next.bindings.get_mut(id) {
                if let Some(e) = catalog.get(&b.entry_id) {
                    b.scale = [a.width_cm / e.dims_cm[0], a.depth_cm / e.dims_cm[1], a.height_cm / e.dims_cm[2]];
                }
            }
        }
    }
    next.revision += 1;
    Ok(next)
}

fn position(scene: &DecorScene, id: &str) -> Result<usize, PipelineError> {
    scene
        .assets
        .iter()
        .position(|a| a.id == id)
        .ok_or_else(|| PipelineError::InvalidEdit(ValidationReport::single(Violation::on("unknown_target", id, "not in the scene"))))
}
