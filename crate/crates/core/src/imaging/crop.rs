use super::components::largest;
use super::{otsu_threshold, BinaryMask, Heatmap};
use crate::geometry::BBox;

/// Per-pixel `value > tau`.
pub fn binarize(h: &Heatmap, tau: f64) -> BinaryMask {
    let bits = h.values().iter().map(|&v| v > tau).collect();
    BinaryMask::new(h.width(), h.height(), bits).expect("same dimensions as the heatmap")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropResult {
    /// Crop in image coordinates.
    pub bbox: BBox,
    /// Otsu level on the 8-bit quantized heatmap.
    pub threshold: u8,
    /// True when the attention was degenerate and the full image is returned.
    pub fallback: bool,
}

/// Infers the local-branch crop from an attention heatmap.
///
/// The heatmap is quantized to 256 levels and thresholded with Otsu; the
/// largest 8-connected foreground region is boxed and the box is rescaled
/// from heatmap to image coordinates. A constant heatmap or an empty mask
/// yields the full image.
pub fn attention_crop(h: &Heatmap, image_width: usize, image_height: usize) -> CropResult {
    let full = BBox {
        x_min: 0.0,
        y_min: 0.0,
        x_max: image_width as f64,
        y_max: image_height as f64,
    };
    let gray = h.quantize();
    let otsu = otsu_threshold(&gray);
    let fallback = CropResult {
        bbox: full,
        threshold: otsu.threshold,
        fallback: true,
    };
    if otsu.degenerate {
        return fallback;
    }

    let mask = gray.threshold(otsu.threshold);
    let Some(region) = largest(&mask) else {
        return fallback;
    };

    let sx = image_width as f64 / h.width() as f64;
    let sy = image_height as f64 / h.height() as f64;
    let b = region.bbox();
    let bbox = BBox {
        x_min: (b.x_min * sx).clamp(0.0, full.x_max),
        y_min: (b.y_min * sy).clamp(0.0, full.y_max),
        x_max: (b.x_max * sx).clamp(0.0, full.x_max),
        y_max: (b.y_max * sy).clamp(0.0, full.y_max),
    };
    CropResult {
        bbox,
        threshold: otsu.threshold,
        fallback: false,
    }
}
