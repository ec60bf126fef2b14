//! Vocabulary shared by every stage: assets, orientations, plan directives,
//! layouts and the decorated scene itself.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::TranscriptEntry;
use crate::geometry::{Rect, Surface};
use crate::optimizer::SolverParams;
use crate::retrieval::Binding;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("point ({x}, {y}) lies outside the surface bounding box")]
    OutsideBbox { x: f64, y: f64 },
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("unknown surface index {0}")]
    UnknownSurface(usize),
}

/// A selected decorative asset, represented by its bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub id: String,
    pub name: String,
    /// Extent along the asset-local x axis at yaw 0.
    pub width_cm: f64,
    /// Extent along the asset-local y axis at yaw 0.
    pub depth_cm: f64,
    pub height_cm: f64,
    pub surface_index: usize,
    #[serde(default)]
    pub style: String,
    #[serde(default)]
    pub material: String,
}

impl AssetSpec {
    pub fn footprint_area(&self) -> f64 {
        self.width_cm * self.depth_cm
    }
}

/// An asset before an id has been assigned (selector output, edit payloads).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDraft {
    pub name: String,
    pub width_cm: f64,
    pub depth_cm: f64,
    pub height_cm: f64,
    pub surface_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
}

/// Yaw encoded as two booleans: yaw = 90·r90 + 180·r180 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub r90: bool,
    pub r180: bool,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation { r90: false, r180: false },
        Orientation { r90: true, r180: false },
        Orientation { r90: false, r180: true },
        Orientation { r90: true, r180: true },
    ];

    pub fn yaw_deg(self) -> u32 {
        90 * u32::from(self.r90) + 180 * u32::from(self.r180)
    }

    /// Index 0..4 in quarter turns.
    pub fn quarter_turns(self) -> usize {
        (self.yaw_deg() / 90) as usize
    }

    pub fn from_quarter_turns(q: usize) -> Self {
        Self::ALL[q % 4]
    }

    pub fn from_yaw_deg(yaw: i64) -> Option<Self> {
        let y = yaw.rem_euclid(360);
        (y % 90 == 0).then(|| Self::from_quarter_turns((y / 90) as usize))
    }

    pub fn rotated(self, quarter_turns: usize) -> Self {
        Self::from_quarter_turns(self.quarter_turns() + quarter_turns)
    }

    pub fn direction(self) -> Direction {
        match (self.r90, self.r180) {
            (false, false) => Direction::Forward,
            (true, false) => Direction::Left,
            (false, true) => Direction::Backward,
            (true, true) => Direction::Right,
        }
    }

    /// Width and depth of the axis-aligned footprint of a `w × d` box.
    pub fn extents(self, w: f64, d: f64) -> (f64, f64) {
        if self.r90 {
            (d, w)
        } else {
            (w, d)
        }
    }
}

/// Named facing directions used by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Left,
    Backward,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Forward, Direction::Left, Direction::Backward, Direction::Right];

    pub fn orientation(self) -> Orientation {
        match self {
            Direction::Forward => Orientation { r90: false, r180: false },
            Direction::Left => Orientation { r90: true, r180: false },
            Direction::Backward => Orientation { r90: false, r180: true },
            Direction::Right => Orientation { r90: true, r180: true },
        }
    }
}

impl From<Direction> for Orientation {
    fn from(d: Direction) -> Self {
        d.orientation()
    }
}

/// Cells of the uniform 3×3 partition of a surface bbox. North is the back
/// (+y), south the front (−y), west is −x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    NW,
    N,
    NE,
    W,
    C,
    E,
    SW,
    S,
    SE,
}

impl Region {
    pub const ALL: [Region; 9] =
        [Region::NW, Region::N, Region::NE, Region::W, Region::C, Region::E, Region::SW, Region::S, Region::SE];

    /// (column, row) with column 0 = west and row 0 = south.
    pub fn cell(self) -> (usize, usize) {
        match self {
            Region::SW => (0, 0),
            Region::S => (1, 0),
            Region::SE => (2, 0),
            Region::W => (0, 1),
            Region::C => (1, 1),
            Region::E => (2, 1),
            Region::NW => (0, 2),
            Region::N => (1, 2),
            Region::NE => (2, 2),
        }
    }

    pub fn from_cell(col: usize, row: usize) -> Self {
        const GRID: [[Region; 3]; 3] =
            [[Region::SW, Region::S, Region::SE], [Region::W, Region::C, Region::E], [Region::NW, Region::N, Region::NE]];
        GRID[row][col]
    }

    /// The closed rectangle of this cell inside `bbox`.
    pub fn rect(self, bbox: &Rect) -> Rect {
        let (c, r) = self.cell();
        let w = bbox.width() / 3.0;
        let d = bbox.depth() / 3.0;
        Rect::new(
            bbox.min_x + w * c as f64,
            bbox.min_y + d * r as f64,
            bbox.min_x + w * (c + 1) as f64,
            bbox.min_y + d * (r + 1) as f64,
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::NW => "NW",
            Region::N => "N",
            Region::NE => "NE",
            Region::W => "W",
            Region::C => "C",
            Region::E => "E",
            Region::SW => "SW",
            Region::S => "S",
            Region::SE => "SE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionRelation {
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
    OnTopOf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRelation {
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentRelation {
    VerticalLeft,
    VerticalMid,
    VerticalRight,
    HorizontalFront,
    HorizontalMid,
    HorizontalBack,
}

/// One edge of the scene graph emitted by the planner.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanDirective {
    GlobalRegion { subject: String, region: Region },
    RelativePosition { subject: String, reference: String, relation: PositionRelation },
    Distance { subject: String, reference: String, relation: DistanceRelation },
    Alignment { subject: String, reference: String, relation: AlignmentRelation },
    Orientation { subject: String, direction: Direction },
}

impl PlanDirective {
    pub fn subject(&self) -> &str {
        match self {
            PlanDirective::GlobalRegion { subject, .. }
            | PlanDirective::RelativePosition { subject, .. }
            | PlanDirective::Distance { subject, .. }
            | PlanDirective::Alignment { subject, .. }
            | PlanDirective::Orientation { subject, .. } => subject,
        }
    }

    pub fn reference(&self) -> Option<&str> {
        match self {
            PlanDirective::RelativePosition { reference, .. }
            | PlanDirective::Distance { reference, .. }
            | PlanDirective::Alignment { reference, .. } => Some(reference),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PlanDirective::GlobalRegion { .. } => "global_region",
            PlanDirective::RelativePosition { .. } => "relative_position",
            PlanDirective::Distance { .. } => "distance",
            PlanDirective::Alignment { .. } => "alignment",
            PlanDirective::Orientation { .. } => "orientation",
        }
    }

    /// True for every directive mentioning `id` as subject or reference.
    pub fn mentions(&self, id: &str) -> bool {
        self.subject() == id || self.reference() == Some(id)
    }

    pub fn is_stacking(&self) -> bool {
        matches!(self, PlanDirective::RelativePosition { relation: PositionRelation::OnTopOf, .. })
    }

    pub(crate) fn rename(&mut self, from: &str, to: &str) {
        let fix = |s: &mut String| {
            if s == from {
                *s = to.to_string();
            }
        };
        match self {
            PlanDirective::GlobalRegion { subject, .. } | PlanDirective::Orientation { subject, .. } => fix(subject),
            PlanDirective::RelativePosition { subject, reference, .. }
            | PlanDirective::Distance { subject, reference, .. }
            | PlanDirective::Alignment { subject, reference, .. } => {
                fix(subject);
                fix(reference);
            }
        }
    }
}

/// Final pose of one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PlacementRepr", into = "PlacementRepr")]
pub struct Placement {
    pub x_cm: f64,
    pub y_cm: f64,
    pub orientation: Orientation,
    pub stack_base: Option<String>,
    /// Bottom of the asset: surface height plus the heights of the stack below.
    pub z_cm: f64,
}

#[derive(Serialize, Deserialize)]
struct PlacementRepr {
    x_cm: f64,
    y_cm: f64,
    #[serde(default)]
    orientation: Option<Orientation>,
    #[serde(default)]
    yaw_deg: Option<i64>,
    z_cm: f64,
    #[serde(default)]
    stack_base: Option<String>,
}

impl From<Placement> for PlacementRepr {
    fn from(p: Placement) -> Self {
        Self {
            x_cm: p.x_cm,
            y_cm: p.y_cm,
            orientation: Some(p.orientation),
            yaw_deg: Some(i64::from(p.orientation.yaw_deg())),
            z_cm: p.z_cm,
            stack_base: p.stack_base,
        }
    }
}

impl From<PlacementRepr> for Placement {
    fn from(r: PlacementRepr) -> Self {
        let orientation = r.orientation.or_else(|| r.yaw_deg.and_then(Orientation::from_yaw_deg)).unwrap_or_default();
        Self { x_cm: r.x_cm, y_cm: r.y_cm, orientation, stack_base: r.stack_base, z_cm: r.z_cm }
    }
}

/// Asset id → placement, ordered by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout {
    pub placements: BTreeMap<String, Placement>,
}

impl Layout {
    pub fn get(&self, id: &str) -> Option<&Placement> {
        self.placements.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, p: Placement) {
        self.placements.insert(id.into(), p);
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }
}

/// Axis-aligned footprint of `asset` centred at `(x, y)`. A quarter turn swaps
/// width and depth; a half turn leaves the box unchanged.
pub fn footprint(asset: &AssetSpec, x_cm: f64, y_cm: f64, orientation: Orientation) -> Rect {
    let (w, d) = orientation.extents(asset.width_cm, asset.depth_cm);
    Rect::from_center(x_cm, y_cm, w, d)
}

/// Region of the 3×3 partition of the surface bbox containing `(x, y)`.
/// Points on a cell boundary belong to the western / southern cell.
pub fn region_of(surface: &Surface, x_cm: f64, y_cm: f64) -> Result<Region, SceneError> {
    region_in_bbox(&surface.bbox, x_cm, y_cm)
}

pub fn region_in_bbox(bbox: &Rect, x: f64, y: f64) -> Result<Region, SceneError> {
    if !bbox.contains_point(x, y, 1e-9) {
        return Err(SceneError::OutsideBbox { x, y });
    }
    // Compare scaled offsets rather than computed thirds to keep ties exact.
    let third = |offset: f64, extent: f64| {
        if offset * 3.0 <= extent {
            0
        } else if offset * 3.0 <= 2.0 * extent {
            1
        } else {
            2
        }
    };
    Ok(Region::from_cell(third(x - bbox.min_x, bbox.width()), third(y - bbox.min_y, bbox.depth())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    /// Where the mesh came from (path or label); the mesh itself is not embedded.
    pub mesh: String,
    pub surfaces: Vec<Surface>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: String,
    pub n_assets: usize,
    pub seed: u64,
    /// Solver settings used for the scene; edits re-solve with the same ones.
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub transcripts: Vec<TranscriptEntry>,
}

/// A decorated piece of furniture; the unit of editing and export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorScene {
    pub schema_version: u32,
    #[serde(default)]
    pub revision: u32,
    pub furniture: Furniture,
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub directives: Vec<PlanDirective>,
    pub layout: Layout,
    #[serde(default)]
    pub bindings: BTreeMap<String, Binding>,
    pub provenance: Provenance,
}

impl DecorScene {
    pub fn asset(&self, id: &str) -> Option<&AssetSpec> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn surface(&self, index: usize) -> Option<&Surface> {
        self.furniture.surfaces.get(index)
    }

    pub fn assets_on(&self, surface_index: usize) -> impl Iterator<Item = &AssetSpec> {
        self.assets.iter().filter(move |a| a.surface_index == surface_index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Lower-case, underscore-separated form of an asset name used in ids.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.trim().chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("asset");
    }
    out
}

/// Next free `slug-N` id given the ids already in use.
pub fn next_asset_id<'a>(name: &str, taken: impl IntoIterator<Item = &'a str>) -> String {
    let base = slug(name);
    let taken: std::collections::BTreeSet<&str> = taken.into_iter().collect();
    (1..).map(|n| format!("{base}-{n}")).find(|id| !taken.contains(id.as_str())).expect("unbounded range")
}
