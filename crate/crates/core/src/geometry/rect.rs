use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in the furniture XY frame, in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, depth: f64) -> Self {
        Self::new(cx - width / 2.0, cy - depth / 2.0, cx + width / 2.0, cy + depth / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn depth(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.depth().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    /// True when the rectangle has no positive extent along some axis.
    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.depth() > 0.0) || !self.is_finite()
    }

    pub fn is_finite(&self) -> bool {
        self.min_x.is_finite() && self.min_y.is_finite() && self.max_x.is_finite() && self.max_y.is_finite()
    }

    pub fn inflate(&self, margin: f64) -> Self {
        Self::new(self.min_x - margin, self.min_y - margin, self.max_x + margin, self.max_y + margin)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.min_x + dx, self.min_y + dy, self.max_x + dx, self.max_y + dy)
    }

    /// Area of the intersection; zero when the rectangles only touch.
    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.max_x.min(other.max_x) - self.min_x.max(other.min_x);
        let d = self.max_y.min(other.max_y) - self.min_y.max(other.min_y);
        if w > 0.0 && d > 0.0 {
            w * d
        } else {
            0.0
        }
    }

    /// `other ⊆ self`, with a small absolute tolerance.
    pub fn contains_rect(&self, other: &Rect, eps: f64) -> bool {
        other.min_x >= self.min_x - eps
            && other.min_y >= self.min_y - eps
            && other.max_x <= self.max_x + eps
            && other.max_y <= self.max_y + eps
    }

    pub fn contains_point(&self, x: f64, y: f64, eps: f64) -> bool {
        x >= self.min_x - eps && x <= self.max_x + eps && y >= self.min_y - eps && y <= self.max_y + eps
    }

    /// Minimum boundary-to-boundary Euclidean distance; 0 when touching or overlapping.
    pub fn gap(&self, other: &Rect) -> f64 {
        let dx = (other.min_x - self.max_x).max(self.min_x - other.max_x).max(0.0);
        let dy = (other.min_y - self.max_y).max(self.min_y - other.max_y).max(0.0);
        dx.hypot(dy)
    }

    /// Area of `self` lying outside `other`.
    pub fn area_outside(&self, other: &Rect) -> f64 {
        (self.area() - self.intersection_area(other)).max(0.0)
    }
}
