use serde::{Deserialize, Serialize};

use super::Rect;

/// Raster of supported cells over a surface's bounding box.
///
/// A cell is supported iff its centre lies on one of the surface cluster's
/// upward-facing triangles. Containment queries go through a summed-area
/// table so that each rectangle test is O(1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GridRepr", into = "GridRepr")]
pub struct OccupancyGrid {
    resolution_cm: f64,
    origin: [f64; 2],
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
    /// `(nx + 1) * (ny + 1)` prefix sums of *unsupported* cells.
    unsupported_prefix: Vec<u32>,
}

impl OccupancyGrid {
    /// Empty (all unsupported) grid covering `bbox`.
    pub fn new(bbox: &Rect, resolution_cm: f64) -> Self {
        let nx = cells_along(bbox.width(), resolution_cm);
        let ny = cells_along(bbox.depth(), resolution_cm);
        let mut grid = Self {
            resolution_cm,
            origin: [bbox.min_x, bbox.min_y],
            nx,
            ny,
            cells: vec![false; nx * ny],
            unsupported_prefix: Vec::new(),
        };
        grid.rebuild_prefix();
        grid
    }

    pub fn from_cells(origin: [f64; 2], resolution_cm: f64, nx: usize, ny: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), nx * ny, "cell count does not match grid dimensions");
        let mut grid = Self { resolution_cm, origin, nx, ny, cells, unsupported_prefix: Vec::new() };
        grid.rebuild_prefix();
        grid
    }

    pub fn resolution_cm(&self) -> f64 {
        self.resolution_cm
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn is_supported(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.nx + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin[0] + (ix as f64 + 0.5) * self.resolution_cm,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution_cm,
        )
    }

    pub fn supported_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution_cm * self.resolution_cm
    }

    /// Marks every cell whose centre satisfies `covered`. Only cells inside
    /// `region` are visited.
    pub(crate) fn mark_where(&mut self, region: &Rect, mut covered: impl FnMut(f64, f64) -> bool) {
        if let Some((x0, x1, y0, y1)) = self.center_range(region) {
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    let idx = iy * self.nx + ix;
                    if !self.cells[idx] {
                        let (cx, cy) = self.cell_center(ix, iy);
                        if covered(cx, cy) {
                            self.cells[idx] = true;
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn rebuild_prefix(&mut self) {
        let w = self.nx + 1;
        let mut p = vec![0u32; w * (self.ny + 1)];
        for iy in 0..self.ny {
            let mut row = 0u32;
            for ix in 0..self.nx {
                row += u32::from(!self.cells[iy * self.nx + ix]);
                p[(iy + 1) * w + ix + 1] = p[iy * w + ix + 1] + row;
            }
        }
        self.unsupported_prefix = p;
    }

    /// Inclusive index range of cells whose centres lie in the closed rectangle.
    fn center_range(&self, rect: &Rect) -> Option<(usize, usize, usize, usize)> {
        let r = self.resolution_cm;
        let lo = |v: f64, o: f64| ((v - o) / r - 0.5).ceil();
        let hi = |v: f64, o: f64| ((v - o) / r - 0.5).floor();
        let x0 = lo(rect.min_x, self.origin[0]).max(0.0);
        let y0 = lo(rect.min_y, self.origin[1]).max(0.0);
        let x1 = hi(rect.max_x, self.origin[0]).min(self.nx as f64 - 1.0);
        let y1 = hi(rect.max_y, self.origin[1]).min(self.ny as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            return None;
        }
        Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
    }

    /// Number of unsupported cells whose centres fall inside `rect`.
    pub fn unsupported_in(&self, rect: &Rect) -> usize {
        match self.center_range(rect) {
            None => 0,
            Some((x0, x1, y0, y1)) => {
                let w = self.nx + 1;
                let p = &self.unsupported_prefix;
                let s = p[(y1 + 1) * w + x1 + 1] + p[y0 * w + x0] - p[y0 * w + x1 + 1] - p[(y1 + 1) * w + x0];
                s as usize
            }
        }
    }
}

fn cells_along(extent: f64, res: f64) -> usize {
    ((extent / res) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    resolution_cm: f64,
    origin: [f64; 2],
    nx: usize,
    ny: usize,
    /// One string per row (front row first); `#` supported, `.` unsupported.
    rows: Vec<String>,
}

impl From<OccupancyGrid> for GridRepr {
    fn from(g: OccupancyGrid) -> Self {
        let rows = (0..g.ny)
            .map(|iy| (0..g.nx).map(|ix| if g.is_supported(ix, iy) { '#' } else { '.' }).collect())
            .collect();
        Self { resolution_cm: g.resolution_cm, origin: g.origin, nx: g.nx, ny: g.ny, rows }
    }
}

impl From<GridRepr> for OccupancyGrid {
    fn from(r: GridRepr) -> Self {
        let mut cells = vec![false; r.nx * r.ny];
        for (iy, row) in r.rows.iter().enumerate().take(r.ny) {
            for (ix, ch) in row.chars().enumerate().take(r.nx) {
                cells[iy * r.nx + ix] = ch == '#';
            }
        }
        OccupancyGrid::from_cells(r.origin, r.resolution_cm, r.nx, r.ny, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(w: f64, d: f64) -> OccupancyGrid {
        let bbox = Rect::new(0.0, 0.0, w, d);
        let mut g = OccupancyGrid::new(&bbox, 1.0);
        g.mark_where(&bbox, |_, _| true);
        g.rebuild_prefix();
        g
    }

    #[test]
    fn grid_covers_bbox() {
        let g = full(120.0, 60.0);
        assert_eq!(g.dims(), (120, 60));
        assert_eq!(g.supported_count(), 7200);
    }

    #[test]
    fn prefix_counts_match_brute_force() {
        let bbox = Rect::new(0.0, 0.0, 10.0, 8.0);
        let mut g = OccupancyGrid::new(&bbox, 1.0);
        g.mark_where(&bbox, |x, y| (x as i64 + y as i64) % 3 != 0);
        g.rebuild_prefix();
        let q = Rect::new(1.2, 0.7, 7.9, 6.5);
        let brute = (0..8)
            .flat_map(|iy| (0..10).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| {
                let (cx, cy) = g.cell_center(ix, iy);
                q.contains_point(cx, cy, 0.0) && !g.is_supported(ix, iy)
            })
            .count();
        assert_eq!(g.unsupported_in(&q), brute);
    }

    #[test]
    fn serde_round_trip_preserves_queries() {
        let g = full(5.0, 3.0);
        let json = serde_json::to_string(&g).unwrap();
        let back: OccupancyGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
    }
}
