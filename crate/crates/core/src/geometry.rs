//! Pixel-space rectangles and the detection record that flows through
//! fusion, guidance and evaluation.
//!
//! Coordinates are continuous: width is `x_max - x_min` with no +1 pixel
//! convention, because fused boxes are weighted means and rarely land on
//! integer positions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite or inverted coordinates.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let reason = if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            Some("coordinates must be finite")
        } else if x_min > x_max || y_min > y_max {
            Some("min corner exceeds max corner")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
                reason,
            }),
            None => Ok(Self {
                x_min,
                y_min,
                x_max,
                y_max,
            }),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        (self.width() * self.height()).max(0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Two zero-area boxes give 0, not NaN.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Lexicographic total order over (x_min, y_min, x_max, y_max).
    pub fn lex_cmp(&self, other: &BBox) -> Ordering {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }

    /// True when `self` lies inside the coordinate envelope of `boxes`.
    pub fn within_envelope<'a>(&self, boxes: impl IntoIterator<Item = &'a BBox>, eps: f64) -> bool {
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        let mut any = false;
        for b in boxes {
            any = true;
            for (i, v) in b.to_array().into_iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        any && self
            .to_array()
            .iter()
            .enumerate()
            .all(|(i, v)| *v >= lo[i] - eps && *v <= hi[i] + eps)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// One predicted box from one model on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub model_id: String,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        model_id: impl Into<String>,
        class_id: u32,
        bbox: BBox,
        score: f64,
    ) -> Result<Self> {
        check_score(score)?;
        Ok(Self {
            image_id: image_id.into(),
            model_id: model_id.into(),
            class_id,
            bbox,
            score,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_score(self.score)?;
        let b = self.bbox;
        BBox::new(b.x_min, b.y_min, b.x_max, b.y_max).map(|_| ())
    }
}

pub(crate) fn check_score(score: f64) -> Result<()> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::InvalidScore(score))
    }
}

/// Canonical ranking: score descending, then model id ascending, then box
/// coordinates lexicographically. Every sort over detections uses this so
/// that outputs do not depend on input order.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.model_id.cmp(&b.model_id))
        .then_with(|| a.bbox.lex_cmp(&b.bbox))
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.class_id.cmp(&b.class_id))
}
