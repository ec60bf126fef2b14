//! Feasibility metrics over sets of decorated scenes: out-of-bounds rate and
//! mean bounding-box overlap volume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{footprint_contained, Rect};
use crate::scene::{footprint, AssetSpec, DecorScene, Placement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metrics need at least one scene")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub oob_rate: f64,
    pub bbl_m3: f64,
    pub n_scenes: usize,
}

fn rect_of(a: &AssetSpec, p: &Placement) -> Rect {
    footprint(a, p.x_cm, p.y_cm, p.orientation)
}

/// True when some asset is missing, leaves its surface (no margin) or
/// overhangs the asset it is stacked on.
pub fn scene_out_of_bounds(scene: &DecorScene) -> bool {
    scene.assets.iter().any(|a| {
        let Some(p) = scene.layout.get(&a.id) else { return true };
        let r = rect_of(a, p);
        match &p.stack_base {
            Some(b) => {
                let base = scene.asset(b).zip(scene.layout.get(b));
                base.is_none_or(|(ba, bp)| !rect_of(ba, bp).contains_rect(&r, 1e-9))
            }
            None => scene.surface(a.surface_index).is_none_or(|s| !footprint_contained(s, &r)),
        }
    })
}

/// Σ over unordered asset pairs of their 3D box intersection, in m³.
pub fn scene_bbl_m3(scene: &DecorScene) -> f64 {
    let boxes: Vec<(Rect, f64, f64)> = scene
        .assets
        .iter()
        .filter_map(|a| scene.layout.get(&a.id).map(|p| (rect_of(a, p), p.z_cm, p.z_cm + a.height_cm)))
        .collect();
    let mut total = 0.0;
    for (i, (ra, za0, za1)) in boxes.iter().enumerate() {
        for (rb, zb0, zb1) in &boxes[i + 1..] {
            let dz = (za1.min(*zb1) - za0.max(*zb0)).max(0.0);
            total += ra.intersection_area(rb) * dz;
        }
    }
    total / 1e6
}

pub fn oob_rate(scenes: &[DecorScene]) -> Result<f64, MetricsError> {
    if scenes.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(scenes.iter().filter(|s| scene_out_of_bounds(s)).count() as f64 / scenes.len() as f64)
}

pub fn bbl(scenes: &[DecorScene]) -> Result<f64, MetricsError> {
    if scenes.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(scenes.iter().map(scene_bbl_m3).sum::<f64>() / scenes.len() as f64)
}

pub fn report(scenes: &[DecorScene]) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport { oob_rate: oob_rate(scenes)?, bbl_m3: bbl(scenes)?, n_scenes: scenes.len() })
}
