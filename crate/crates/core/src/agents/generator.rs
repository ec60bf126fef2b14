//! Template-driven stand-in for a language model.
//!
//! [`respond`] reads the stage from the schema title and the stage context
//! from the `<context>` block of a request and writes a reply that passes
//! the stage validator. Everything is a pure function of the context, so the
//! same request always yields the same reply.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use serde_json::{json, Value};

use super::banks::{Bank, STYLES};
use super::{context_of, Stage, SurfaceSummary};
use crate::llm::ChatRequest;
use crate::scene::{AssetSpec, Layout, Orientation, PlanDirective, Region};

/// A catalog-style item: name and nominal bounding box (w, d, h) in cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Item {
    pub name: &'static str,
    pub w: f64,
    pub d: f64,
    pub h: f64,
    /// Flat-topped, so small items may rest on it.
    pub base: bool,
}

const fn item(name: &'static str, w: f64, d: f64, h: f64) -> Item {
    Item { name, w, d, h, base: false }
}

const fn base(name: &'static str, w: f64, d: f64, h: f64) -> Item {
    Item { name, w, d, h, base: true }
}

pub const THEMES: [(&str, &[Item]); 5] = [
    (
        "office",
        &[
            item("monitor", 55.0, 20.0, 45.0),
            item("keyboard", 44.0, 14.0, 3.0),
            item("computer mouse", 7.0, 11.0, 4.0),
            item("desk lamp", 15.0, 15.0, 45.0),
            base("stack of books", 22.0, 28.0, 12.0),
            item("pen holder", 8.0, 8.0, 11.0),
            item("coffee mug", 9.0, 9.0, 10.0),
            item("potted succulent", 10.0, 10.0, 12.0),
            base("desk organizer", 25.0, 15.0, 12.0),
            item("alarm clock", 10.0, 6.0, 10.0),
            item("photo frame", 15.0, 3.0, 20.0),
            item("notebook", 21.0, 30.0, 2.0),
            item("speaker", 12.0, 12.0, 20.0),
            item("headphone stand", 12.0, 12.0, 25.0),
            item("sticky notes", 8.0, 8.0, 3.0),
            item("tablet", 25.0, 18.0, 1.0),
        ],
    ),
    (
        "living",
        &[
            item("table lamp", 30.0, 30.0, 50.0),
            item("vase of sunflower", 15.0, 15.0, 40.0),
            base("stack of books", 22.0, 28.0, 12.0),
            item("candle", 8.0, 8.0, 12.0),
            item("photo frame", 15.0, 3.0, 20.0),
            item("decorative bowl", 25.0, 25.0, 10.0),
            item("potted plant", 20.0, 20.0, 35.0),
            item("ceramic sculpture", 12.0, 12.0, 25.0),
            base("serving tray", 40.0, 25.0, 3.0),
            item("remote control", 5.0, 18.0, 2.0),
            item("coaster set", 10.0, 10.0, 3.0),
            item("alarm clock", 10.0, 6.0, 10.0),
            item("magazine", 21.0, 28.0, 1.0),
            item("scented diffuser", 8.0, 8.0, 22.0),
            item("glass terrarium", 18.0, 18.0, 20.0),
        ],
    ),
    (
        "tea",
        &[
            base("tea tray", 45.0, 30.0, 3.0),
            item("teapot", 20.0, 15.0, 15.0),
            item("tea cup", 9.0, 9.0, 7.0),
            item("tea caddy", 10.0, 10.0, 12.0),
            item("incense burner", 10.0, 10.0, 8.0),
            item("bonsai", 25.0, 20.0, 30.0),
            item("sugar bowl", 10.0, 10.0, 8.0),
            item("tea kettle", 22.0, 18.0, 22.0),
            item("cup stand", 15.0, 15.0, 12.0),
            item("bamboo whisk", 6.0, 6.0, 11.0),
            item("porcelain vase", 12.0, 12.0, 28.0),
            item("candle", 8.0, 8.0, 12.0),
        ],
    ),
    (
        "kids",
        &[
            item("globe", 30.0, 30.0, 40.0),
            item("toy robot", 12.0, 10.0, 22.0),
            item("crayon box", 15.0, 10.0, 4.0),
            base("picture book", 25.0, 25.0, 2.0),
            item("night light", 10.0, 10.0, 15.0),
            item("toy car", 12.0, 6.0, 5.0),
            item("piggy bank", 15.0, 10.0, 12.0),
            item("building blocks", 20.0, 15.0, 10.0),
            item("alarm clock", 10.0, 6.0, 10.0),
            item("teddy bear", 20.0, 15.0, 25.0),
            item("pencil cup", 8.0, 8.0, 11.0),
            item("snow globe", 10.0, 10.0, 12.0),
        ],
    ),
    (
        "bedroom",
        &[
            item("bedside lamp", 25.0, 25.0, 45.0),
            item("alarm clock", 10.0, 6.0, 10.0),
            base("jewelry box", 20.0, 14.0, 8.0),
            item("water glass", 8.0, 8.0, 12.0),
            item("phone charger", 8.0, 8.0, 3.0),
            base("stack of books", 22.0, 28.0, 12.0),
            item("candle", 8.0, 8.0, 12.0),
            item("hand cream", 5.0, 5.0, 12.0),
            item("photo frame", 15.0, 3.0, 20.0),
            item("small plant", 12.0, 12.0, 18.0),
            item("perfume bottle", 6.0, 6.0, 10.0),
            item("eyeglasses case", 16.0, 6.0, 4.0),
        ],
    ),
];

/// Looks up the nominal dimensions of an item by name across all themes.
pub fn find_item(name: &str) -> Option<Item> {
    let n = name.trim().to_ascii_lowercase();
    let all = || THEMES.iter().flat_map(|(_, items)| items.iter().copied());
    all().find(|i| i.name == n).or_else(|| all().find(|i| n.contains(i.name) || i.name.contains(n.as_str())))
}

#[derive(Debug, Deserialize)]
struct GenContext {
    #[serde(default)]
    prompt: String,
    #[serde(default)]
    n_assets: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    surfaces: Vec<SurfaceSummary>,
    #[serde(default)]
    assets: Vec<AssetSpec>,
    #[serde(default)]
    directives: Vec<PlanDirective>,
    #[serde(default)]
    layout: Layout,
    #[serde(default)]
    instruction: Option<String>,
}

/// Produces a reply for `request`, or an error message when the request is
/// not a recognised stage request.
pub fn respond(request: &ChatRequest) -> Result<String, String> {
    let title = request.schema_title().ok_or("request has no response schema title")?;
    let stage = Stage::from_schema_title(&title).ok_or_else(|| format!("unknown stage schema `{title}`"))?;
    let raw = context_of(request).ok_or("request carries no <context> block")?;
    let ctx: GenContext = serde_json::from_value(raw).map_err(|e| format!("bad context: {e}"))?;
    let reply = match stage {
        Stage::Select => select(&ctx)?,
        Stage::Stylize => stylize(&ctx),
        Stage::Plan => plan(&ctx),
        Stage::Edit => edit(&ctx),
    };
    Ok(serde_json::to_string_pretty(&reply).expect("reply serializes"))
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn theme_of(prompt: &str) -> &'static [Item] {
    let p = prompt.to_ascii_lowercase();
    let keys: [(&str, &[&str]); 4] = [
        ("office", &["office", "work", "study", "desk", "computer"]),
        ("tea", &["tea", "zen", "japanese", "chinese"]),
        ("kids", &["kid", "child", "toy", "nursery", "play"]),
        ("bedroom", &["bed", "night", "sleep"]),
    ];
    for (theme, words) in keys {
        if words.iter().any(|w| p.contains(w)) {
            return THEMES.iter().find(|(t, _)| *t == theme).map(|(_, i)| *i).expect("theme exists");
        }
    }
    THEMES[1].1
}

fn round_down_half(v: f64) -> f64 {
    ((v * 2.0 + 1e-9).floor() / 2.0).max(2.0)
}

/// Splits `n` assets over surfaces in proportion to area (largest remainder),
/// giving every surface at least one when there are enough assets.
fn allocate(n: usize, surfaces: &[SurfaceSummary]) -> Vec<usize> {
    let k = surfaces.len();
    let mut counts = vec![0usize; k];
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| surfaces[b].area_cm2.total_cmp(&surfaces[a].area_cm2).then(a.cmp(&b)));
    if n < k {
        for &i in order.iter().take(n) {
            counts[i] = 1;
        }
        return counts;
    }
    for c in counts.iter_mut() {
        *c = 1;
    }
    let rest = n - k;
    let total: f64 = surfaces.iter().map(|s| s.area_cm2).sum();
    let quotas: Vec<f64> = surfaces.iter().map(|s| rest as f64 * s.area_cm2 / total).collect();
    let mut given = 0;
    for i in 0..k {
        let q = quotas[i].floor() as usize;
        counts[i] += q;
        given += q;
    }
    let mut rem: Vec<usize> = (0..k).collect();
    rem.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in rem.iter().cycle().take(rest - given) {
        counts[i] += 1;
    }
    counts
}

fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > y) != (b[1] > y) {
            let t = (y - a[1]) / (b[1] - a[1]);
            if x < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

fn rect_in_polygon(poly: &[[f64; 2]], cx: f64, cy: f64, w: f64, d: f64) -> bool {
    let steps = |len: f64| ((len / 2.0).ceil() as usize).max(1);
    let (nx, ny) = (steps(w), steps(d));
    for i in 0..=nx {
        for j in 0..=ny {
            let x = cx - w / 2.0 + w * i as f64 / nx as f64;
            let y = cy - d / 2.0 + d * j as f64 / ny as f64;
            if !point_in_polygon(poly, x, y) {
                return false;
            }
        }
    }
    true
}

fn is_rectangular(s: &SurfaceSummary) -> bool {
    s.boundary.len() == 4
}

/// Whether a `w × d` footprint (plus the 1 cm edge margin) fits the surface
/// somewhere, optionally with its center inside `region`.
fn fits(s: &SurfaceSummary, w: f64, d: f64, region: Option<Region>) -> bool {
    let (w, d) = (w + 2.0, d + 2.0);
    if w > s.width_cm || d > s.depth_cm {
        return false;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (w / 2.0, s.width_cm - w / 2.0, d / 2.0, s.depth_cm - d / 2.0);
    if let Some(r) = region {
        let (c, row) = r.cell();
        x0 = x0.max(s.width_cm * c as f64 / 3.0 + 0.5);
        x1 = x1.min(s.width_cm * (c + 1) as f64 / 3.0);
        y0 = y0.max(s.depth_cm * row as f64 / 3.0 + 0.5);
        y1 = y1.min(s.depth_cm * (row + 1) as f64 / 3.0);
        if x0 > x1 || y0 > y1 {
            return false;
        }
    }
    if is_rectangular(s) {
        return true;
    }
    let mut y = y0;
    while y <= y1 + 1e-9 {
        let mut x = x0;
        while x <= x1 + 1e-9 {
            if rect_in_polygon(&s.boundary, x, y, w, d) {
                return true;
            }
            x += 2.0;
        }
        y += 2.0;
    }
    false
}

fn select(ctx: &GenContext) -> Result<Value, String> {
    if ctx.surfaces.is_empty() {
        return Err("no surfaces in context".into());
    }
    let theme = theme_of(&ctx.prompt);
    let counts = allocate(ctx.n_assets.max(1), &ctx.surfaces);
    let offset = (fnv1a(ctx.prompt.as_bytes()) ^ ctx.seed) as usize;
    let mut assets = Vec::new();
    let mut cursor = 0usize;
    for (s, &count) in ctx.surfaces.iter().zip(&counts) {
        if count == 0 {
            continue;
        }
        // The theme's lead item anchors the first surface; the rest rotate
        // through the list starting from a seed-dependent offset.
        let picks: Vec<Item> = (0..count)
            .map(|i| {
                if cursor == 0 && i == 0 {
                    theme[0]
                } else {
                    let k = 1 + (offset + cursor + i) % (theme.len() - 1);
                    theme[k]
                }
            })
            .collect();
        cursor += count;
        let nominal: f64 = picks.iter().map(|p| p.w * p.d).sum();
        let mut scale = (0.30 * s.area_cm2 / nominal).sqrt().min(1.0);
        for p in &picks {
            scale = scale.min(0.45 * s.width_cm / p.w).min(0.45 * s.depth_cm / p.d);
        }
        let max_h = s.clearance_cm.map(|c| 0.85 * c);
        for p in picks {
            let (mut w, mut d) = (round_down_half(p.w * scale), round_down_half(p.d * scale));
            let mut tries = 0;
            while !fits(s, w, d, None) && tries < 20 {
                w = round_down_half(w * 0.85);
                d = round_down_half(d * 0.85);
                tries += 1;
            }
            let mut h = round_down_half(p.h * scale.max(0.5));
            if let Some(m) = max_h {
                h = h.min(round_down_half(m));
            }
            assets.push(json!({
                "name": p.name,
                "width_cm": w,
                "depth_cm": d,
                "height_cm": h,
                "surface_index": s.index,
            }));
        }
    }
    Ok(json!({ "assets": assets }))
}

fn style_for(prompt: &str) -> &'static str {
    let p = prompt.to_ascii_lowercase();
    if let Some(s) = STYLES.iter().find(|s| p.contains(&s.to_ascii_lowercase())) {
        return s;
    }
    let keywords: [(&str, &str); 12] = [
        ("minimal", "Minimalist"),
        ("scandi", "Scandinavian"),
        ("nordic", "Scandinavian"),
        ("beach", "Coastal"),
        ("cozy", "Farmhouse"),
        ("warm", "Rustic"),
        ("tea", "Asian"),
        ("zen", "Asian"),
        ("office", "Contemporary"),
        ("kid", "Country"),
        ("old", "Vintage"),
        ("elegant", "Art Deco"),
    ];
    if let Some((_, s)) = keywords.iter().find(|(k, _)| p.contains(k)) {
        return s;
    }
    STYLES[(fnv1a(p.as_bytes()) % STYLES.len() as u64) as usize]
}

fn material_for(name: &str) -> &'static str {
    let n = name.to_ascii_lowercase();
    let table: [(&[&str], &str); 12] = [
        (&["book", "notebook", "magazine", "notes", "paper"], "paper"),
        (&["monitor", "keyboard", "mouse", "speaker", "tablet", "remote", "charger", "robot", "crayon", "blocks", "car"], "plastic"),
        (&["vase", "glass", "terrarium", "diffuser", "perfume", "globe", "candle"], "glass"),
        (&["sculpture", "bowl", "cup", "mug", "teapot", "coaster"], "marble"),
        (&["lamp", "light", "kettle"], "steel"),
        (&["plant", "succulent", "bonsai", "sunflower", "whisk"], "fibre"),
        (&["jewelry"], "silver"),
        (&["headphone", "eyeglasses"], "leather"),
        (&["teddy"], "cotton"),
        (&["incense", "burner"], "bronze"),
        (&["clock", "frame", "tray", "caddy", "organizer", "box", "stand", "holder", "bank"], "wood"),
        (&["cream"], "plastic"),
    ];
    table.iter().find(|(keys, _)| keys.iter().any(|k| n.contains(k))).map_or("wood", |(_, m)| m)
}

fn stylize(ctx: &GenContext) -> Value {
    let style = style_for(&ctx.prompt);
    let materials = Bank::materials();
    let assignments: Vec<Value> = ctx
        .assets
        .iter()
        .map(|a| {
            let m = materials.lookup(material_for(&a.name)).unwrap_or("wood");
            json!({ "id": a.id, "style": style, "material": m })
        })
        .collect();
    json!({ "assignments": assignments })
}

fn directive(kind: &str, subject: &str, extra: Value) -> Value {
    let mut v = json!({ "kind": kind, "subject": subject });
    if let (Some(obj), Some(more)) = (v.as_object_mut(), extra.as_object()) {
        for (k, x) in more {
            obj.insert(k.clone(), x.clone());
        }
    }
    v
}

fn plan(ctx: &GenContext) -> Value {
    let mut out = Vec::new();
    let mut by_surface: BTreeMap<usize, Vec<&AssetSpec>> = BTreeMap::new();
    for a in &ctx.assets {
        by_surface.entry(a.surface_index).or_default().push(a);
    }
    for (k, assets) in by_surface {
        let Some(s) = ctx.surfaces.iter().find(|s| s.index == k) else { continue };
        plan_surface(s, &assets, &mut out);
    }
    json!({ "directives": out })
}

fn plan_surface(s: &SurfaceSummary, assets: &[&AssetSpec], out: &mut Vec<Value>) {
    let (bw, bd) = (s.width_cm, s.depth_cm);
    let mut order: Vec<&AssetSpec> = assets.to_vec();
    // Anchor: the largest footprint, first in proposal order on ties.
    let anchor_pos = (0..order.len())
        .max_by(|&i, &j| order[i].footprint_area().total_cmp(&order[j].footprint_area()).then(j.cmp(&i)))
        .expect("non-empty");
    let anchor = order.remove(anchor_pos);
    order.insert(0, anchor);

    let regular = is_rectangular(s);
    let preferred = if bd >= 40.0 { [Region::N, Region::C, Region::S] } else { [Region::C, Region::N, Region::S] };
    let anchor_region = preferred.into_iter().find(|r| fits(s, anchor.width_cm, anchor.depth_cm, Some(*r)));
    if let Some(r) = anchor_region {
        out.push(directive("global_region", &anchor.id, json!({ "region": r.label() })));
    }
    out.push(directive("orientation", &anchor.id, json!({ "direction": "forward" })));

    // Pick at most one topper per base among the trailing assets.
    let clearance = s.clearance_cm.unwrap_or(f64::INFINITY);
    let mut toppers: BTreeMap<&str, &str> = BTreeMap::new();
    let mut used_bases: BTreeSet<&str> = BTreeSet::new();
    for t in order.iter().skip(3) {
        let base = order.iter().find(|b| {
            b.id != t.id
                && find_item(&b.name).is_some_and(|i| i.base)
                && !used_bases.contains(b.id.as_str())
                && !toppers.contains_key(b.id.as_str())
                && t.width_cm + 1.0 <= b.width_cm
                && t.depth_cm + 1.0 <= b.depth_cm
                && t.height_cm + b.height_cm <= 0.85 * clearance
        });
        if let Some(b) = base {
            if toppers.values().any(|v| *v == t.id) || used_bases.contains(t.id.as_str()) {
                continue;
            }
            toppers.insert(t.id.as_str(), b.id.as_str());
            used_bases.insert(b.id.as_str());
        }
    }
    let is_topper = |id: &str| toppers.contains_key(id);

    let anchored = anchor_region.is_some() && regular;
    if let Some(b) = order.get(1).filter(|b| !is_topper(&b.id)) {
        let deep = bd >= 40.0 && anchor.depth_cm + b.depth_cm <= 0.6 * bd;
        if anchored && deep {
            out.push(directive("relative_position", &b.id, json!({ "reference": anchor.id, "relation": "in_front_of" })));
            out.push(directive("alignment", &b.id, json!({ "reference": anchor.id, "relation": "vertical_mid" })));
        } else if anchored && anchor.width_cm / 2.0 + b.width_cm <= 0.5 * bw {
            out.push(directive("relative_position", &b.id, json!({ "reference": anchor.id, "relation": "right_of" })));
            out.push(directive("distance", &b.id, json!({ "reference": anchor.id, "relation": "near" })));
        } else {
            out.push(directive("distance", &b.id, json!({ "reference": anchor.id, "relation": "near" })));
        }
    }
    if let Some(c) = order.get(2).filter(|c| !is_topper(&c.id)) {
        let deep = bd >= 40.0 && order.get(1).is_some_and(|b| anchor.depth_cm + b.depth_cm <= 0.6 * bd);
        if anchored && deep && anchor.width_cm / 2.0 + c.width_cm <= 0.5 * bw {
            out.push(directive("relative_position", &c.id, json!({ "reference": anchor.id, "relation": "right_of" })));
        } else if anchored && !deep && anchor.width_cm / 2.0 + c.width_cm + 1.0 <= bw / 3.0 {
            out.push(directive("relative_position", &c.id, json!({ "reference": anchor.id, "relation": "left_of" })));
        }
        out.push(directive("distance", &c.id, json!({ "reference": anchor.id, "relation": "near" })));
    }
    for (i, a) in order.iter().enumerate().skip(3) {
        if let Some(b) = toppers.get(a.id.as_str()) {
            out.push(directive("relative_position", &a.id, json!({ "reference": b, "relation": "on_top_of" })));
            continue;
        }
        let prev = order[i - 1];
        out.push(directive("distance", &a.id, json!({ "reference": prev.id, "relation": "near" })));
        if i % 3 == 0 {
            out.push(directive("alignment", &a.id, json!({ "reference": prev.id, "relation": "horizontal_front" })));
        }
    }
}

// ---------------------------------------------------------------- editing

const VERBS: [&str; 14] = [
    "remove", "delete", "take away", "add", "insert", "put", "place", "replace", "swap", "make", "resize", "rotate",
    "turn", "move",
];

fn strip_articles(s: &str) -> String {
    let words: Vec<&str> = s
        .split_whitespace()
        .filter(|w| !matches!(*w, "the" | "a" | "an" | "some" | "that" | "this"))
        .collect();
    words.join(" ").trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

fn resolve<'a>(phrase: &str, assets: &'a [AssetSpec]) -> Option<&'a AssetSpec> {
    let p = phrase.to_ascii_lowercase();
    if p.is_empty() {
        return None;
    }
    if let Some(a) = assets.iter().find(|a| a.id == phrase) {
        return Some(a);
    }
    let mut hits: Vec<&AssetSpec> = assets
        .iter()
        .filter(|a| {
            let n = a.name.to_ascii_lowercase();
            n == p || n.contains(&p) || p.contains(&n)
        })
        .collect();
    hits.sort_by(|a, b| b.name.len().cmp(&a.name.len()).then(a.id.cmp(&b.id)));
    hits.first().copied()
}

/// Text between the first `start` marker and the earliest stop word.
fn phrase_after(text: &str, start: &str, stops: &[&str]) -> String {
    let Some(i) = text.find(start) else { return String::new() };
    let rest = &text[i + start.len()..];
    let end = stops.iter().filter_map(|s| rest.find(s)).min().unwrap_or(rest.len());
    strip_articles(&rest[..end])
}

fn region_words(text: &str) -> Option<Region> {
    let t = text.to_ascii_lowercase();
    let table: [(&str, Region); 17] = [
        ("back left", Region::NW),
        ("back right", Region::NE),
        ("front left", Region::SW),
        ("front right", Region::SE),
        ("north west", Region::NW),
        ("north east", Region::NE),
        ("south west", Region::SW),
        ("south east", Region::SE),
        ("center", Region::C),
        ("centre", Region::C),
        ("middle", Region::C),
        ("back", Region::N),
        ("north", Region::N),
        ("front", Region::S),
        ("south", Region::S),
        ("left side", Region::W),
        ("right side", Region::E),
    ];
    table.iter().find(|(w, _)| t.contains(w)).map(|(_, r)| *r)
}

fn insert_surface(ctx: &GenContext, text: &str) -> usize {
    if let Some(i) = text.find("surface ") {
        if let Some(k) = text[i + 8..].split_whitespace().next().and_then(|w| w.trim_matches(|c: char| !c.is_ascii_digit()).parse::<usize>().ok()) {
            if ctx.surfaces.iter().any(|s| s.index == k) {
                return k;
            }
        }
    }
    let used = |k: usize| ctx.assets.iter().filter(|a| a.surface_index == k).map(AssetSpec::footprint_area).sum::<f64>();
    ctx.surfaces
        .iter()
        .max_by(|a, b| (a.area_cm2 - used(a.index)).total_cmp(&(b.area_cm2 - used(b.index))).then(b.index.cmp(&a.index)))
        .map_or(0, |s| s.index)
}

fn draft_for(name: &str, surface: &SurfaceSummary, like: Option<&AssetSpec>) -> Value {
    let (mut w, mut d, mut h) = match (find_item(name), like) {
        (Some(i), _) => (i.w, i.d, i.h),
        (None, Some(a)) => (a.width_cm, a.depth_cm, a.height_cm),
        (None, None) => (12.0, 12.0, 15.0),
    };
    let f = (0.2 * surface.width_cm / w).min(0.2 * surface.depth_cm / d).min(1.0);
    w = round_down_half(w * f);
    d = round_down_half(d * f);
    if let Some(c) = surface.clearance_cm {
        h = h.min(0.85 * c);
    }
    h = round_down_half(h);
    json!({ "name": name, "width_cm": w, "depth_cm": d, "height_cm": h, "surface_index": surface.index })
}

fn parse_dims(text: &str) -> Option<[f64; 3]> {
    let cleaned: String = text.chars().map(|c| if c.is_ascii_digit() || c == '.' { c } else { ' ' }).collect();
    let nums: Vec<f64> = cleaned.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    (nums.len() >= 3).then(|| [nums[0], nums[1], nums[2]])
}

fn edit_clause(ctx: &GenContext, clause: &str, ops: &mut Vec<Value>, unresolved: &mut Vec<String>) {
    let text = clause.trim().to_ascii_lowercase();
    let stops = [" with ", " to ", " by ", " on ", " onto ", " next ", " near ", " from ", " in ", " at ", " around", " bigger", " larger", " smaller", " 90", " 180", " 270"];
    let verb = VERBS.iter().filter_map(|v| text.find(v).map(|i| (i, *v))).min();
    let Some((_, verb)) = verb else {
        unresolved.push(clause.trim().to_string());
        return;
    };
    let object = phrase_after(&text, verb, &stops);
    let target = |phrase: &str, unresolved: &mut Vec<String>| -> Option<AssetSpec> {
        let hit = resolve(phrase, &ctx.assets).cloned();
        if hit.is_none() {
            unresolved.push(phrase.to_string());
        }
        hit
    };
    match verb {
        "remove" | "delete" | "take away" => {
            if let Some(a) = target(&object, unresolved) {
                ops.push(json!({ "kind": "remove", "target": a.id }));
            }
        }
        "add" | "insert" | "put" | "place" => {
            let k = insert_surface(ctx, &text);
            let Some(s) = ctx.surfaces.iter().find(|s| s.index == k) else { return };
            let mut directives = Vec::new();
            let near = phrase_after(&text, " near ", &[" on ", " and "]);
            let reference = resolve(&near, &ctx.assets).or_else(|| ctx.assets.iter().find(|a| a.surface_index == k));
            if let Some(r) = reference.filter(|r| r.surface_index == k) {
                directives.push(json!({ "kind": "distance", "subject": "new", "reference": r.id, "relation": "near" }));
            }
            ops.push(json!({ "kind": "insert", "asset": draft_for(&object, s, None), "directives": directives }));
        }
        "replace" | "swap" => {
            let Some(a) = target(&object, unresolved) else { return };
            let with = phrase_after(&text, " with ", &[" on ", " and "]);
            let with = if with.is_empty() { phrase_after(&text, " for ", &[" on ", " and "]) } else { with };
            let Some(s) = ctx.surfaces.iter().find(|s| s.index == a.surface_index) else { return };
            let name = if with.is_empty() { a.name.clone() } else { with };
            ops.push(json!({ "kind": "replace", "target": a.id, "asset": draft_for(&name, s, Some(&a)) }));
        }
        "make" | "resize" => {
            let Some(a) = target(&object, unresolved) else { return };
            let dims = parse_dims(&text[text.find(&object).map_or(0, |i| i + object.len())..]).unwrap_or_else(|| {
                let f = if text.contains("smaller") || text.contains("shrink") { 0.75 } else { 1.25 };
                [a.width_cm * f, a.depth_cm * f, a.height_cm * f].map(|v| (v * 2.0).round() / 2.0)
            });
            ops.push(json!({ "kind": "resize", "target": a.id, "width_cm": dims[0], "depth_cm": dims[1], "height_cm": dims[2] }));
        }
        "rotate" | "turn" => {
            let Some(a) = target(&object, unresolved) else { return };
            let q = if text.contains("180") || text.contains("around") {
                2
            } else if text.contains("270") || text.contains("clockwise") && !text.contains("counter") {
                3
            } else {
                1
            };
            let current = ctx.layout.get(&a.id).map_or(Orientation::default(), |p| p.orientation);
            ops.push(json!({ "kind": "rotate", "target": a.id, "orientation": current.rotated(q) }));
        }
        "move" => {
            let Some(a) = target(&object, unresolved) else { return };
            let rels: [(&str, &str, &str); 7] = [
                (" left of ", "relative_position", "left_of"),
                (" right of ", "relative_position", "right_of"),
                (" in front of ", "relative_position", "in_front_of"),
                (" behind ", "relative_position", "behind"),
                (" on top of ", "relative_position", "on_top_of"),
                (" next to ", "distance", "near"),
                (" near ", "distance", "near"),
            ];
            let mut directives = Vec::new();
            for (marker, kind, relation) in rels {
                let r = phrase_after(&text, marker, &[" and "]);
                if text.contains(marker) {
                    match resolve(&r, &ctx.assets) {
                        Some(reference) => directives.push(json!({ "kind": kind, "subject": a.id, "reference": reference.id, "relation": relation })),
                        None => unresolved.push(r),
                    }
                    break;
                }
            }
            if directives.is_empty() {
                if let Some(region) = region_words(&text) {
                    directives.push(json!({ "kind": "global_region", "subject": a.id, "region": region.label() }));
                }
            }
            // Keep the directives about other aspects of the asset.
            for d in ctx.directives.iter().filter(|d| d.subject() == a.id) {
                let keep = matches!(d, PlanDirective::Orientation { .. })
                    || (matches!(d, PlanDirective::GlobalRegion { .. }) && directives.iter().all(|x| x["kind"] != "global_region"));
                if keep && !directives.iter().any(|x| x["kind"] == "relative_position" && matches!(d, PlanDirective::GlobalRegion { .. })) {
                    directives.push(serde_json::to_value(d).expect("directive serializes"));
                }
            }
            ops.push(json!({ "kind": "reposition", "target": a.id, "directives": directives }));
        }
        _ => unresolved.push(clause.trim().to_string()),
    }
}

fn edit(ctx: &GenContext) -> Value {
    let instruction = ctx.instruction.clone().unwrap_or_default();
    let lower = instruction.to_ascii_lowercase();
    // Split on ";" and on " and " when a new verb follows.
    let mut clauses: Vec<String> = Vec::new();
    for part in lower.split(';') {
        let mut current = String::new();
        for piece in part.split(" and ") {
            let starts_verb = VERBS.iter().any(|v| piece.trim_start().starts_with(v));
            if starts_verb && !current.is_empty() {
                clauses.push(std::mem::take(&mut current));
            }
            if !current.is_empty() {
                current.push_str(" and ");
            }
            current.push_str(piece);
        }
        if !current.trim().is_empty() {
            clauses.push(current);
        }
    }
    let mut ops = Vec::new();
    let mut unresolved = Vec::new();
    for c in &clauses {
        edit_clause(ctx, c, &mut ops, &mut unresolved);
    }
    json!({ "ops": ops, "unresolved": unresolved })
}
