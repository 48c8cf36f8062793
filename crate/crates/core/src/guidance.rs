//! Classifier-guided detection: an image the classifier calls positive keeps
//! every detection, any other image keeps only confident detections.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_score, Detection};

/// Image-level PE probability from the fusion-branch classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub image_id: String,
    pub p_f: f64,
}

impl ClassifierVerdict {
    pub fn new(image_id: impl Into<String>, p_f: f64) -> Result<Self> {
        check_score(p_f)?;
        Ok(Self {
            image_id: image_id.into(),
            p_f,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    /// Classifier decision threshold; `p_f >= theta` counts as positive.
    pub theta: f64,
    /// On negative images a detection survives only if `score > conf_floor`.
    pub conf_floor: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            conf_floor: 0.018,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.theta), ("conf_floor", self.conf_floor)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn guided_filter(
    dets: &[Detection],
    verdict: &ClassifierVerdict,
    cfg: &GuidanceConfig,
) -> Result<Vec<Detection>> {
    if let Some(d) = dets.iter().find(|d| d.image_id != verdict.image_id) {
        return Err(Error::ImageMismatch {
            expected: verdict.image_id.clone(),
            found: d.image_id.clone(),
        });
    }
    if verdict.p_f >= cfg.theta {
        return Ok(dets.to_vec());
    }
    Ok(dets.iter().filter(|d| d.score > cfg.conf_floor).cloned().collect())
}

/// Applies [`guided_filter`] image by image. Every image that has detections
/// must have a verdict; images with a verdict and no detections map to an
/// empty list.
pub fn guided_filter_dataset(
    per_image: &BTreeMap<String, Vec<Detection>>,
    verdicts: &BTreeMap<String, ClassifierVerdict>,
    cfg: &GuidanceConfig,
) -> Result<BTreeMap<String, Vec<Detection>>> {
    cfg.validate()?;
    let missing: Vec<String> = per_image
        .iter()
        .filter(|(id, dets)| !dets.is_empty() && !verdicts.contains_key(*id))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVerdicts(missing));
    }

    per_image
        .par_iter()
        .map(|(id, dets)| {
            let kept = match verdicts.get(id) {
                Some(v) => guided_filter(dets, v, cfg)?,
                None => Vec::new(),
            };
            Ok((id.clone(), kept))
        })
        .collect()
}
