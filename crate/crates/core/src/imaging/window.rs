use serde::{Deserialize, Serialize};

use super::{GrayImage, HuImage};
use crate::error::{Error, Result};

/// Display window over Hounsfield units. The default is the soft-tissue
/// window, level 40 HU and width 400 HU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub level: f64,
    pub width: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            level: 40.0,
            width: 400.0,
        }
    }
}

impl WindowSpec {
    pub fn new(level: f64, width: f64) -> Result<Self> {
        let spec = Self { level, width };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.level.is_finite() || !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::Config(format!(
                "window needs a finite level and a positive width, got WL={} WW={}",
                self.level, self.width
            )));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.level - self.width / 2.0
    }

    pub fn upper(&self) -> f64 {
        self.level + self.width / 2.0
    }

    /// Gray level for one HU sample; halves round away from zero.
    pub fn apply(&self, hu: f64) -> u8 {
        let g = 255.0 * (hu - self.lower()) / self.width;
        g.clamp(0.0, 255.0).round() as u8
    }
}

pub fn window(img: &HuImage, spec: &WindowSpec) -> GrayImage {
    let values = img.values().iter().map(|&hu| spec.apply(hu as f64)).collect();
    GrayImage::new(img.width(), img.height(), values).expect("same dimensions as a valid HU image")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_tissue_window() {
        let s = WindowSpec::default();
        assert_eq!(s.apply(-160.0), 0);
        assert_eq!(s.apply(-1000.0), 0);
        assert_eq!(s.apply(240.0), 255);
        assert_eq!(s.apply(3071.0), 255);
        // 255 * 200 / 400 = 127.5
        assert_eq!(s.apply(40.0), 128);
    }

    #[test]
    fn monotone_over_full_range() {
        let s = WindowSpec::default();
        let mut prev = 0u8;
        for hu in -1024..=3071 {
            let g = s.apply(hu as f64);
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn whole_image() {
        let img = HuImage::new(3, 1, vec![-1000, 40, 500]).unwrap();
        assert_eq!(window(&img, &WindowSpec::default()).values(), &[0, 128, 255]);
    }

    #[test]
    fn invalid_spec() {
        assert!(WindowSpec::new(40.0, 0.0).is_err());
        assert!(WindowSpec::new(f64::NAN, 10.0).is_err());
    }
}
