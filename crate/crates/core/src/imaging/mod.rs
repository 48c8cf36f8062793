//! CT windowing, attention-crop inference and mask-derived labels.

mod components;
mod crop;
mod otsu;
pub mod pgm;
mod window;

pub use components::{components, largest_component, mask_to_annotations, mask_to_label, Component, Label};
pub use crop::{attention_crop, binarize, CropResult};
pub use otsu::{otsu_threshold, OtsuThreshold};
pub use window::{window, WindowSpec};

use crate::error::{Error, Result};

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Image(format!("dimensions must be positive, got {width}x{height}")));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Image(format!(
            "{width}x{height} image needs {} values, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Row-major CT slice in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct HuImage {
    width: usize,
    height: usize,
    values: Vec<i16>,
}

impl HuImage {
    pub fn new(width: usize, height: usize, values: Vec<i16>) -> Result<Self> {
        check_len(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    /// Decodes little-endian signed 16-bit samples.
    pub fn from_le_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| Error::Image("image dimensions overflow".into()))?;
        if bytes.len() < expected {
            let offset = bytes.len() - bytes.len() % 2;
            return Err(Error::Image(format!(
                "raw data truncated at byte offset {offset}: expected {expected} bytes for {width}x{height} i16 samples"
            )));
        }
        if bytes.len() > expected {
            return Err(Error::Image(format!(
                "unexpected trailing data at byte offset {expected}: file has {} bytes, {width}x{height} i16 samples need {expected}",
                bytes.len()
            )));
        }
        let values = bytes.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i16] {
        &self.values
    }
}

/// Row-major 8-bit image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_len(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &v in &self.values {
            h[v as usize] += 1;
        }
        h
    }

    /// Foreground where the gray level is strictly above `level`.
    pub fn threshold(&self, level: u8) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v > level).collect(),
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        pgm::encode(self.width, self.height, &self.values)
    }
}

/// Attention map with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Image(format!("heatmap value {v} at index {i} is outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    /// Min-max normalizes an arbitrary real feature map to [0, 1]. A constant
    /// map becomes all zeros.
    pub fn from_feature_map(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Image(format!("feature map value at index {i} is not finite")));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let values = values
            .into_iter()
            .map(|v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// 256-level quantization, `round(255 * v)`.
    pub fn quantize(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| (v * 255.0).round() as u8).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_len(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, on: bool) {
        self.bits[row * self.width + col] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Any nonzero gray level is foreground.
    pub fn from_gray(img: &GrayImage) -> Self {
        img.threshold(0)
    }

    /// 0 / 255 PGM.
    pub fn to_pgm(&self) -> Vec<u8> {
        let px: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        pgm::encode(self.width, self.height, &px)
    }
}
