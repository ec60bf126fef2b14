//! Deterministic checks gating every language-model stage.
//!
//! Validators never fail; they return a [`ValidationReport`] whose violations
//! are fed back to the model as a revision request.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::banks::Bank;
use crate::geometry::Surface;
use crate::scene::{
    AlignmentRelation, AssetDraft, AssetSpec, Direction, DistanceRelation, PlanDirective, PositionRelation, Region,
};

/// Share of a surface's area the selected footprints may cover.
pub const MAX_SURFACE_FILL: f64 = 0.70;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
}

impl Violation {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), item: None }
    }

    pub fn on(code: &str, item: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into(), item: Some(item.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self { ok: violations.is_empty(), violations }
    }

    pub fn single(v: Violation) -> Self {
        Self::from_violations(vec![v])
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    /// Text handed back to the model when asking for a revision.
    pub fn revision_request(&self) -> String {
        let mut s = String::from("Your previous answer was rejected by the validator. Fix every issue below and reply with the complete corrected JSON only.\n");
        for v in &self.violations {
            match &v.item {
                Some(item) => s.push_str(&format!("- [{}] {}: {}\n", v.code, item, v.message)),
                None => s.push_str(&format!("- [{}] {}\n", v.code, v.message)),
            }
        }
        s
    }
}

/// Pulls the JSON object out of a reply, tolerating code fences or a short
/// preamble around it.
pub fn extract_json(content: &str) -> Result<Value, Violation> {
    let trimmed = content.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let (start, end) = match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(s), Some(e)) if e > s => (s, e),
        _ => return Err(Violation::new("bad_json", "reply does not contain a JSON object")),
    };
    serde_json::from_str(&trimmed[start..=end]).map_err(|e| Violation::new("bad_json", format!("reply is not valid JSON: {e}")))
}

fn top_array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>, Violation> {
    v.as_object()
        .ok_or_else(|| Violation::new("bad_json", "reply must be a JSON object"))?
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Violation::new("bad_json", format!("reply must contain an array field `{key}`")))
}

fn field_str<'a>(o: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a str> {
    o.get(key).and_then(Value::as_str)
}

fn field_num(o: &serde_json::Map<String, Value>, key: &str) -> Option<f64> {
    o.get(key).and_then(Value::as_f64)
}

/// Parses an asset proposal `{"assets": [{name, width_cm, depth_cm, height_cm, surface_index}]}`.
pub fn parse_asset_proposal(content: &str) -> Result<Vec<AssetDraft>, ValidationReport> {
    let v = extract_json(content).map_err(ValidationReport::single)?;
    let items = top_array(&v, "assets").map_err(ValidationReport::single)?;
    let mut drafts = Vec::new();
    let mut violations = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let Some(o) = item.as_object() else {
            violations.push(Violation::on("bad_json", format!("assets[{i}]"), "entry must be an object"));
            continue;
        };
        let name = field_str(o, "name");
        let dims = (field_num(o, "width_cm"), field_num(o, "depth_cm"), field_num(o, "height_cm"));
        let surface = o.get("surface_index").and_then(Value::as_u64);
        match (name, dims, surface) {
            (Some(name), (Some(w), Some(d), Some(h)), Some(s)) => drafts.push(AssetDraft {
                name: name.to_string(),
                width_cm: w,
                depth_cm: d,
                height_cm: h,
                surface_index: s as usize,
                style: None,
                material: None,
            }),
            _ => violations.push(Violation::on(
                "bad_json",
                format!("assets[{i}]"),
                "entry needs string `name`, numeric `width_cm`, `depth_cm`, `height_cm` and integer `surface_index`",
            )),
        }
    }
    if violations.is_empty() {
        Ok(drafts)
    } else {
        Err(ValidationReport::from_violations(violations))
    }
}

/// Checks a proposed asset list against the extracted surfaces.
pub fn validate_assets(proposal: &[AssetDraft], surfaces: &[Surface], n_assets: usize) -> ValidationReport {
    let mut out = Vec::new();
    if proposal.len() != n_assets {
        out.push(Violation::new(
            "count_mismatch",
            format!("expected exactly {n_assets} assets, got {}", proposal.len()),
        ));
    }
    let mut per_surface = vec![(0usize, 0.0f64); surfaces.len()];
    for (i, a) in proposal.iter().enumerate() {
        let item = format!("assets[{i}] {}", a.name);
        if a.name.trim().is_empty() {
            out.push(Violation::on("bad_field", &item, "name must not be empty"));
        }
        let dims = [a.width_cm, a.depth_cm, a.height_cm];
        if dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            out.push(Violation::on("bad_field", &item, "bounding box dimensions must be positive numbers"));
            continue;
        }
        let Some(s) = surfaces.get(a.surface_index) else {
            out.push(Violation::on(
                "invalid_surface",
                &item,
                format!("surface_index {} does not exist (valid: 0..{})", a.surface_index, surfaces.len()),
            ));
            continue;
        };
        let (bw, bd) = (s.bbox.width(), s.bbox.depth());
        let (amin, amax) = (a.width_cm.min(a.depth_cm), a.width_cm.max(a.depth_cm));
        let oversize = amin > bw.min(bd) || amax > bw.max(bd);
        if oversize {
            out.push(Violation::on(
                "oversize",
                &item,
                format!("{} x {} cm does not fit surface {} ({:.1} x {:.1} cm)", a.width_cm, a.depth_cm, s.index, bw, bd),
            ));
        }
        if let Some(c) = s.clearance_cm {
            if a.height_cm > c {
                out.push(Violation::on(
                    "too_tall",
                    &item,
                    format!("height {} cm exceeds the {:.1} cm clearance above surface {}", a.height_cm, c, s.index),
                ));
            }
        }
        per_surface[a.surface_index].0 += 1;
        if !oversize {
            per_surface[a.surface_index].1 += a.width_cm * a.depth_cm;
        }
    }
    if per_surface.iter().any(|(n, _)| *n >= 2) {
        for (k, (n, _)) in per_surface.iter().enumerate() {
            if *n == 0 {
                out.push(Violation::on(
                    "unpopulated_surface",
                    format!("surface {k}"),
                    "every surface must receive at least one asset while another surface holds several",
                ));
            }
        }
    }
    for (k, (_, area)) in per_surface.iter().enumerate() {
        let cap = MAX_SURFACE_FILL * surfaces[k].area_cm2;
        if *area > cap {
            out.push(Violation::on(
                "over_capacity",
                format!("surface {k}"),
                format!("footprints total {area:.0} cm² but at most {cap:.0} cm² may be covered"),
            ));
        }
    }
    ValidationReport::from_violations(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleAssignment {
    pub id: String,
    pub style: String,
    pub material: String,
}

/// Parses `{"assignments": [{id, style, material}]}`.
pub fn parse_style_assignment(content: &str) -> Result<Vec<StyleAssignment>, ValidationReport> {
    let v = extract_json(content).map_err(ValidationReport::single)?;
    let items = top_array(&v, "assignments").map_err(ValidationReport::single)?;
    let mut out = Vec::new();
    let mut violations = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item.as_object().map(|o| (field_str(o, "id"), field_str(o, "style"), field_str(o, "material"))) {
            Some((Some(id), Some(style), Some(material))) => {
                out.push(StyleAssignment { id: id.into(), style: style.into(), material: material.into() })
            }
            _ => violations.push(Violation::on(
                "bad_json",
                format!("assignments[{i}]"),
                "entry needs string fields `id`, `style` and `material`",
            )),
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(ValidationReport::from_violations(violations))
    }
}

/// Checks that every asset received exactly one style and material from the banks.
pub fn validate_styles(proposal: &[StyleAssignment], assets: &[AssetSpec], styles: &Bank, materials: &Bank) -> ValidationReport {
    let mut out = Vec::new();
    if proposal.len() != assets.len() {
        out.push(Violation::new(
            "count_mismatch",
            format!("expected {} assignments, got {}", assets.len(), proposal.len()),
        ));
    }
    let known: BTreeSet<&str> = assets.iter().map(|a| a.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    for p in proposal {
        if !known.contains(p.id.as_str()) {
            out.push(Violation::on("unknown_asset", &p.id, "no asset with this id"));
            continue;
        }
        if !seen.insert(p.id.as_str()) {
            out.push(Violation::on("duplicate_assignment", &p.id, "asset assigned more than once"));
        }
        if !styles.contains(&p.style) {
            out.push(Violation::on("unknown_style", &p.id, format!("style `{}` is not in the style bank", p.style)));
        }
        if !materials.contains(&p.material) {
            out.push(Violation::on(
                "unknown_material",
                &p.id,
                format!("material `{}` is not in the material bank", p.material),
            ));
        }
    }
    for a in assets {
        if !seen.contains(a.id.as_str()) && proposal.iter().all(|p| p.id != a.id) {
            out.push(Violation::on("missing_assignment", &a.id, "asset has no style/material assignment"));
        }
    }
    ValidationReport::from_violations(out)
}

fn parse_enum<T: serde::de::DeserializeOwned>(o: &serde_json::Map<String, Value>, key: &str) -> Result<T, String> {
    let raw = o.get(key).ok_or_else(|| format!("missing field `{key}`"))?;
    let s = raw.as_str().ok_or_else(|| format!("field `{key}` must be a string"))?;
    let normalised = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
    serde_json::from_value(Value::String(normalised)).map_err(|_| format!("`{s}` is not an allowed value for `{key}`"))
}

/// Parses `{"directives": [...]}`. Entries using words outside the fixed
/// vocabulary are reported as `bad_vocabulary`; structurally broken entries
/// as `bad_json`.
pub fn parse_plan(content: &str) -> Result<Vec<PlanDirective>, ValidationReport> {
    let v = extract_json(content).map_err(ValidationReport::single)?;
    let items = top_array(&v, "directives").map_err(ValidationReport::single)?;
    let mut out = Vec::new();
    let mut violations = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let at = format!("directives[{i}]");
        let Some(o) = item.as_object() else {
            violations.push(Violation::on("bad_json", at, "entry must be an object"));
            continue;
        };
        let Some(subject) = field_str(o, "subject") else {
            violations.push(Violation::on("bad_json", at, "missing string field `subject`"));
            continue;
        };
        let subject = subject.to_string();
        let reference = || field_str(o, "reference").map(str::to_string).ok_or_else(|| "missing field `reference`".to_string());
        let kind = field_str(o, "kind").unwrap_or("");
        let parsed: Result<PlanDirective, (bool, String)> = match kind {
            "global_region" => match o.get("region").and_then(Value::as_str) {
                Some(r) => Region::parse(r)
                    .map(|region| PlanDirective::GlobalRegion { subject, region })
                    .ok_or((true, format!("`{r}` is not one of NW,N,NE,W,C,E,SW,S,SE"))),
                None => Err((false, "missing field `region`".into())),
            },
            "relative_position" => reference().map_err(|e| (false, e)).and_then(|reference| {
                parse_enum::<PositionRelation>(o, "relation")
                    .map(|relation| PlanDirective::RelativePosition { subject, reference, relation })
                    .map_err(|e| (true, e))
            }),
            "distance" => reference().map_err(|e| (false, e)).and_then(|reference| {
                parse_enum::<DistanceRelation>(o, "relation")
                    .map(|relation| PlanDirective::Distance { subject, reference, relation })
                    .map_err(|e| (true, e))
            }),
            "alignment" => reference().map_err(|e| (false, e)).and_then(|reference| {
                parse_enum::<AlignmentRelation>(o, "relation")
                    .map(|relation| PlanDirective::Alignment { subject, reference, relation })
                    .map_err(|e| (true, e))
            }),
            "orientation" => parse_enum::<Direction>(o, "direction")
                .map(|direction| PlanDirective::Orientation { subject, direction })
                .map_err(|e| (true, e)),
            other => Err((true, format!("unknown directive kind `{other}`"))),
        };
        match parsed {
            Ok(d) => out.push(d),
            Err((true, msg)) => violations.push(Violation::on("bad_vocabulary", at, msg)),
            Err((false, msg)) => violations.push(Violation::on("bad_json", at, msg)),
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(ValidationReport::from_violations(violations))
    }
}

/// Whether a `w × d` box fits inside a `bw × bd` box under some quarter turn.
pub(crate) fn fits_within(w: f64, d: f64, bw: f64, bd: f64) -> bool {
    w.min(d) <= bw.min(bd) + 1e-9 && w.max(d) <= bw.max(bd) + 1e-9
}

/// Checks a plan against the asset inventory.
pub fn validate_plan(directives: &[PlanDirective], assets: &[AssetSpec]) -> ValidationReport {
    let by_id: BTreeMap<&str, &AssetSpec> = assets.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut out = Vec::new();
    let mut globals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut orients: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bases: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut distance_pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut align_pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();

    for (i, d) in directives.iter().enumerate() {
        let at = format!("directives[{i}]");
        let subject = d.subject();
        let Some(sa) = by_id.get(subject) else {
            out.push(Violation::on("unknown_asset", at, format!("subject `{subject}` is not a selected asset")));
            continue;
        };
        if let Some(r) = d.reference() {
            let Some(ra) = by_id.get(r) else {
                out.push(Violation::on("unknown_asset", at, format!("reference `{r}` is not a selected asset")));
                continue;
            };
            if r == subject {
                out.push(Violation::on("self_reference", at, format!("`{subject}` cannot be placed relative to itself")));
                continue;
            }
            if ra.surface_index != sa.surface_index {
                out.push(Violation::on(
                    "cross_surface",
                    at,
                    format!("`{subject}` (surface {}) and `{r}` (surface {}) are on different surfaces", sa.surface_index, ra.surface_index),
                ));
                continue;
            }
        }
        match d {
            PlanDirective::GlobalRegion { .. } => *globals.entry(subject).or_default() += 1,
            PlanDirective::Orientation { .. } => *orients.entry(subject).or_default() += 1,
            PlanDirective::RelativePosition { reference, relation: PositionRelation::OnTopOf, .. } => {
                bases.entry(subject).or_default().push(reference)
            }
            PlanDirective::Distance { reference, .. } => *distance_pairs.entry((subject, reference)).or_default() += 1,
            PlanDirective::Alignment { reference, .. } => *align_pairs.entry((subject, reference)).or_default() += 1,
            PlanDirective::RelativePosition { .. } => {}
        }
    }
    for (id, n) in &globals {
        if *n > 1 {
            out.push(Violation::on("duplicate_global", *id, "at most one global region per asset"));
        }
    }
    for (id, n) in &orients {
        if *n > 1 {
            out.push(Violation::on("duplicate_orientation", *id, "at most one orientation per asset"));
        }
    }
    for ((s, r), n) in distance_pairs.iter().chain(align_pairs.iter()) {
        if *n > 1 {
            out.push(Violation::on(
                "duplicate_relation",
                format!("{s} -> {r}"),
                "at most one distance and one alignment directive per asset pair",
            ));
        }
    }
    for (id, bs) in &bases {
        if bs.len() > 1 {
            out.push(Violation::on("multiple_bases", *id, "an asset can rest on top of only one other asset"));
        }
        if globals.contains_key(id) {
            out.push(Violation::on(
                "stacked_global",
                *id,
                "an asset placed on top of another asset cannot also have a global region",
            ));
        }
        for b in bs {
            let (s, base) = (by_id[id], by_id[b]);
            if !fits_within(s.width_cm, s.depth_cm, base.width_cm, base.depth_cm) {
                out.push(Violation::on(
                    "stack_oversize",
                    *id,
                    format!("{} x {} cm cannot rest on `{b}` ({} x {} cm) in any orientation", s.width_cm, s.depth_cm, base.width_cm, base.depth_cm),
                ));
            }
        }
    }
    // Cycle detection along subject -> base edges.
    let mut reported = BTreeSet::new();
    for start in bases.keys() {
        let mut path = vec![*start];
        let mut cur = *start;
        while let Some(next) = bases.get(cur).and_then(|v| v.first()) {
            if let Some(pos) = path.iter().position(|p| p == next) {
                let mut cycle: Vec<&str> = path[pos..].to_vec();
                cycle.sort_unstable();
                if reported.insert(cycle.clone()) {
                    out.push(Violation::on("stack_cycle", cycle.join(", "), "on_top_of relations form a cycle"));
                }
                break;
            }
            path.push(next);
            cur = next;
        }
    }
    ValidationReport::from_violations(out)
}

/// Stacks must not rise above the clearance of their surface.
pub fn validate_stack_clearance(directives: &[PlanDirective], assets: &[AssetSpec], surfaces: &[Surface]) -> ValidationReport {
    let by_id: BTreeMap<&str, &AssetSpec> = assets.iter().map(|a| (a.id.as_str(), a)).collect();
    let base_of: BTreeMap<&str, &str> = directives
        .iter()
        .filter_map(|d| match d {
            PlanDirective::RelativePosition { subject, reference, relation: PositionRelation::OnTopOf } => {
                Some((subject.as_str(), reference.as_str()))
            }
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (subject, _) in &base_of {
        let Some(a) = by_id.get(subject) else { continue };
        let Some(clearance) = surfaces.get(a.surface_index).and_then(|s| s.clearance_cm) else { continue };
        let mut total = a.height_cm;
        let mut cur = *subject;
        let mut guard = 0;
        while let Some(b) = base_of.get(cur) {
            total += by_id.get(b).map_or(0.0, |x| x.height_cm);
            cur = b;
            guard += 1;
            if guard > assets.len() {
                break;
            }
        }
        if total > clearance {
            out.push(Violation::on(
                "stack_too_tall",
                *subject,
                format!("stack reaches {total:.1} cm but only {clearance:.1} cm of clearance is available"),
            ));
        }
    }
    ValidationReport::from_violations(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn surfaces() -> Vec<Surface> {
        vec![
            Surface::rectangle(0, Rect::new(0.0, 0.0, 120.0, 60.0), 75.0, 1.0),
            Surface::rectangle(1, Rect::new(0.0, 0.0, 60.0, 40.0), 110.0, 1.0),
        ]
    }

    fn draft(name: &str, w: f64, d: f64, s: usize) -> AssetDraft {
        AssetDraft { name: name.into(), width_cm: w, depth_cm: d, height_cm: 10.0, surface_index: s, style: None, material: None }
    }

    fn spec(id: &str, w: f64, d: f64, s: usize) -> AssetSpec {
        AssetSpec {
            id: id.into(),
            name: id.into(),
            width_cm: w,
            depth_cm: d,
            height_cm: 10.0,
            surface_index: s,
            style: String::new(),
            material: String::new(),
        }
    }

    #[test]
    fn eight_assets_forty_percent_fill_is_ok() {
        // 0.4 * 7200 = 2880 on surface 0, 0.4 * 2400 = 960 on surface 1.
        let mut p: Vec<AssetDraft> = (0..5).map(|i| draft(&format!("a{i}"), 24.0, 24.0, 0)).collect();
        p.extend((0..3).map(|i| draft(&format!("b{i}"), 16.0, 20.0, 1)));
        let r = validate_assets(&p, &surfaces(), 8);
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn seven_assets_when_eight_requested() {
        let p: Vec<AssetDraft> = (0..7).map(|i| draft(&format!("a{i}"), 10.0, 10.0, i % 2)).collect();
        assert!(validate_assets(&p, &surfaces(), 8).has("count_mismatch"));
    }

    #[test]
    fn oversize_on_shelf() {
        let p = vec![draft("big box", 65.0, 35.0, 1), draft("lamp", 10.0, 10.0, 0)];
        let r = validate_assets(&p, &surfaces(), 2);
        assert!(r.has("oversize"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn unpopulated_and_invalid_surface() {
        let p = vec![draft("a", 10.0, 10.0, 0), draft("b", 10.0, 10.0, 0), draft("c", 10.0, 10.0, 7)];
        let r = validate_assets(&p, &surfaces(), 3);
        assert!(r.has("unpopulated_surface"));
        assert!(r.has("invalid_surface"));
    }

    #[test]
    fn capacity_cap() {
        let p = vec![draft("a", 45.0, 40.0, 1), draft("b", 30.0, 10.0, 0)];
        // 1800 > 0.7 * 2400
        assert!(validate_assets(&p, &surfaces(), 2).has("over_capacity"));
    }

    #[test]
    fn too_tall_under_clearance() {
        let mut s = surfaces();
        s[0].clearance_cm = Some(30.0);
        let mut d = draft("lamp", 10.0, 10.0, 0);
        d.height_cm = 45.0;
        let r = validate_assets(&[d, draft("x", 5.0, 5.0, 1)], &s, 2);
        assert!(r.has("too_tall"));
    }

    #[test]
    fn styles_examples() {
        let assets = vec![spec("a", 1.0, 1.0, 0), spec("b", 1.0, 1.0, 0)];
        let (st, mt) = (Bank::styles(), Bank::materials());
        let ok = vec![
            StyleAssignment { id: "a".into(), style: "Scandinavian".into(), material: "wood".into() },
            StyleAssignment { id: "b".into(), style: "Scandinavian".into(), material: "wood".into() },
        ];
        assert!(validate_styles(&ok, &assets, &st, &mt).ok);
        let mut bad = ok.clone();
        bad[0].style = "cyberpunk".into();
        assert!(validate_styles(&bad, &assets, &st, &mt).has("unknown_style"));
        let omitted = vec![ok[0].clone()];
        let r = validate_styles(&omitted, &assets, &st, &mt);
        assert!(r.has("missing_assignment"));
        assert!(r.has("count_mismatch"));
    }

    #[test]
    fn worked_trio_plan_passes() {
        let assets = vec![spec("monitor", 55.0, 20.0, 0), spec("keyboard", 44.0, 14.0, 0), spec("mouse", 7.0, 11.0, 0)];
        let plan = r#"{"directives": [
            {"kind": "global_region", "subject": "monitor", "region": "C"},
            {"kind": "relative_position", "subject": "keyboard", "reference": "monitor", "relation": "in_front_of"},
            {"kind": "relative_position", "subject": "mouse", "reference": "monitor", "relation": "right_of"},
            {"kind": "distance", "subject": "mouse", "reference": "monitor", "relation": "near"}
        ]}"#;
        let d = parse_plan(plan).unwrap();
        let r = validate_plan(&d, &assets);
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn stack_cycle_detected() {
        let assets = vec![spec("a", 5.0, 5.0, 0), spec("b", 5.0, 5.0, 0)];
        let d = vec![
            PlanDirective::RelativePosition { subject: "a".into(), reference: "b".into(), relation: PositionRelation::OnTopOf },
            PlanDirective::RelativePosition { subject: "b".into(), reference: "a".into(), relation: PositionRelation::OnTopOf },
        ];
        let r = validate_plan(&d, &assets);
        assert_eq!(r.violations.iter().filter(|v| v.code == "stack_cycle").count(), 1);
    }

    #[test]
    fn cross_surface_reference() {
        let assets = vec![spec("a", 5.0, 5.0, 0), spec("b", 5.0, 5.0, 1)];
        let d = vec![PlanDirective::Distance { subject: "a".into(), reference: "b".into(), relation: DistanceRelation::Near }];
        assert!(validate_plan(&d, &assets).has("cross_surface"));
    }

    #[test]
    fn vocabulary_and_structure_errors() {
        let r = parse_plan(r#"{"directives": [
            {"kind": "global_region", "subject": "a", "region": "middle"},
            {"kind": "relative_position", "subject": "a", "reference": "b", "relation": "under"},
            {"kind": "distance", "subject": "a"},
            {"kind": "teleport", "subject": "a"}
        ]}"#)
        .unwrap_err();
        assert_eq!(r.violations.iter().filter(|v| v.code == "bad_vocabulary").count(), 3);
        assert_eq!(r.violations.iter().filter(|v| v.code == "bad_json").count(), 1);
    }

    #[test]
    fn hyphenated_vocabulary_is_accepted() {
        let d = parse_plan(r#"{"directives": [{"kind": "alignment", "subject": "a", "reference": "b", "relation": "vertical-right"}]}"#).unwrap();
        assert_eq!(d[0], PlanDirective::Alignment { subject: "a".into(), reference: "b".into(), relation: AlignmentRelation::VerticalRight });
    }

    #[test]
    fn stacking_rules() {
        let assets = vec![spec("box", 20.0, 20.0, 0), spec("lamp", 30.0, 5.0, 0), spec("candle", 5.0, 5.0, 0)];
        let d = vec![
            PlanDirective::RelativePosition { subject: "lamp".into(), reference: "box".into(), relation: PositionRelation::OnTopOf },
            PlanDirective::RelativePosition { subject: "candle".into(), reference: "box".into(), relation: PositionRelation::OnTopOf },
            PlanDirective::GlobalRegion { subject: "candle".into(), region: Region::C },
        ];
        let r = validate_plan(&d, &assets);
        assert!(r.has("stack_oversize"));
        assert!(r.has("stacked_global"));
    }

    #[test]
    fn validators_are_idempotent() {
        let p = vec![draft("a", 10.0, 10.0, 0), draft("b", 100.0, 100.0, 3)];
        assert_eq!(validate_assets(&p, &surfaces(), 5), validate_assets(&p, &surfaces(), 5));
    }

    #[test]
    fn json_in_code_fence_is_extracted() {
        let v = extract_json("```json\n{\"assets\": []}\n```").unwrap();
        assert!(v["assets"].is_array());
        assert!(extract_json("no json here").is_err());
    }
}
