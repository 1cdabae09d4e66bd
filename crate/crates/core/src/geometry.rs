//! Bounding boxes, detections and the few geometric helpers every other
//! module leans on. Coordinates are continuous pixels; nothing here rounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel space, `(x, y)` being the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite coordinates and non-positive sizes.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox("non-finite coordinate".into()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox("non-positive size".into()));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Point containment, closed on the left/top edge and open on the right/bottom.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = overlap(self.x, self.w, other.x, other.w);
        let ih = overlap(self.y, self.h, other.y, other.h);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Smallest box covering both.
    pub fn union_box(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BoundingBox {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }

    /// Clips the box to `[0, width) x [0, height)`. Returns `None` when nothing is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
            None
        } else {
            Some(BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox { x: self.x + dx, y: self.y + dy, ..*self }
    }
}

/// Length of the overlap of two intervals. A contained interval keeps its own
/// length so identical boxes overlap exactly.
fn overlap(a0: f64, a_len: f64, b0: f64, b_len: f64) -> f64 {
    let (a1, b1) = (a0 + a_len, b0 + b_len);
    if a0 >= b0 && a1 <= b1 {
        a_len
    } else if b0 >= a0 && b1 <= a1 {
        b_len
    } else {
        a1.min(b1) - a0.max(b0)
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers.
pub fn center_distance_2d(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Image-to-ground-plane homography, row-major 3x3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography(pub [f64; 9]);

impl Homography {
    pub fn project(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let m = &self.0;
        let w = m[6] * u + m[7] * v + m[8];
        if w.abs() < 1e-12 {
            return None;
        }
        Some(((m[0] * u + m[1] * v + m[2]) / w, (m[3] * u + m[4] * v + m[5]) / w))
    }

    /// Ground-plane distance between the bottom-center points of two boxes.
    pub fn ground_distance(&self, a: &BoundingBox, b: &BoundingBox) -> Option<f64> {
        let pa = self.project(a.x + a.w / 2.0, a.bottom())?;
        let pb = self.project(b.x + b.w / 2.0, b.bottom())?;
        Some((pa.0 - pb.0).hypot(pa.1 - pb.1))
    }
}

/// One detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(frame_index: u32, bbox: BoundingBox) -> Self {
        Self { frame_index, bbox, confidence: 1.0 }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20.0, 20.0, 5.0, 5.0)), 0.0);
        let v = iou(&a, &bb(5.0, 0.0, 10.0, 10.0));
        assert!((v - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn center_distance_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(center_distance_2d(&a, &a), 0.0);
        assert_eq!(center_distance_2d(&a, &bb(10.0, 0.0, 2.0, 2.0)), 10.0);
        let c0 = bb(-1.0, -1.0, 2.0, 2.0);
        let c1 = bb(2.0, 3.0, 2.0, 2.0);
        assert!((center_distance_2d(&c0, &c1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, -5.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn clip_and_union() {
        let a = bb(-5.0, -5.0, 10.0, 10.0);
        assert_eq!(a.clip(100.0, 100.0), Some(bb(0.0, 0.0, 5.0, 5.0)));
        assert_eq!(a.clip(-1.0, 100.0), None);
        let u = bb(0.0, 0.0, 2.0, 2.0).union_box(&bb(4.0, 1.0, 2.0, 3.0));
        assert_eq!(u, bb(0.0, 0.0, 6.0, 4.0));
    }

    #[test]
    fn identity_homography_matches_pixel_distance() {
        let h = Homography([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let d = h.ground_distance(&bb(0.0, 0.0, 2.0, 2.0), &bb(3.0, 4.0, 2.0, 2.0)).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.5..40.0f64, 0.5..40.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - iou(&b, &a)).abs() < 1e-12);
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }
    }
}
