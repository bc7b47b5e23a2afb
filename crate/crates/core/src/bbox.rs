//! Axis-aligned pixel boxes shared by the data pipeline, detectors and the
//! evaluation harness.

use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, `x2 > x1`, `y2 > y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// True when the box has no positive extent in either axis.
    pub fn is_degenerate(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Intersection area with `other`; 0 when disjoint.
    pub fn intersection_area(&self, other: &PixelBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Clip the box to `[0, w] x [0, h]`.
    pub fn clip_to(&self, w: f64, h: f64) -> PixelBox {
        PixelBox {
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
            x2: self.x2.clamp(0.0, w),
            y2: self.y2.clamp(0.0, h),
        }
    }

    /// Translate by `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> PixelBox {
        PixelBox::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Scale both axes about the origin.
    pub fn scaled(&self, sx: f64, sy: f64) -> PixelBox {
        PixelBox::new(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }
}

/// A ground-truth box with its class id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub class_id: u32,
    pub bbox: PixelBox,
}
