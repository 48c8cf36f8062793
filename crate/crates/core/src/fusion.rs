//! Multi-model box fusion: NMS, NMW and WBF, plus per-model score weighting.
//!
//! All three methods take detections that share one image and one class and
//! walk them in [`rank_order`]. NMW clusters around a seed (the best box of
//! the cluster) and WBF clusters around a running fused box.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rank_order, BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Nms,
    Nmw,
    Wbf,
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nms" => Ok(Self::Nms),
            "nmw" => Ok(Self::Nmw),
            "wbf" => Ok(Self::Wbf),
            other => Err(Error::Config(format!(
                "unknown fusion method `{other}` (expected nms, nmw or wbf)"
            ))),
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nms => "nms",
            Self::Nmw => "nmw",
            Self::Wbf => "wbf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub iou_threshold: f64,
    /// Detections scoring below this (after weighting) are dropped before fusion.
    pub score_floor: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            method: FusionMethod::Wbf,
            iou_threshold: 0.3,
            score_floor: 0.005,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iou threshold {} must lie strictly between 0 and 1",
                self.iou_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.score_floor) {
            return Err(Error::Config(format!(
                "score floor {} must lie in [0, 1]",
                self.score_floor
            )));
        }
        Ok(())
    }
}

/// Per-model ensemble weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelWeights {
    weights: BTreeMap<String, f64>,
    default: Option<f64>,
}

impl ModelWeights {
    /// Every model gets weight 1.
    pub fn uniform() -> Self {
        Self {
            weights: BTreeMap::new(),
            default: Some(1.0),
        }
    }

    /// Explicit weights only; a detection from an unlisted model is an error.
    pub fn new(weights: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let weights: BTreeMap<_, _> = weights.into_iter().collect();
        for (model, w) in &weights {
            check_weight(*w).map_err(|_| {
                Error::Config(format!("weight for `{model}` must be positive and finite, got {w}"))
            })?;
        }
        Ok(Self {
            weights,
            default: None,
        })
    }

    pub fn with_default(mut self, default: f64) -> Result<Self> {
        check_weight(default)
            .map_err(|_| Error::Config(format!("default weight must be positive, got {default}")))?;
        self.default = Some(default);
        Ok(self)
    }

    pub fn get(&self, model_id: &str) -> Option<f64> {
        self.weights.get(model_id).copied().or(self.default)
    }

    pub fn explicit(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    /// Largest configured weight, including the default if there is one.
    pub fn max_weight(&self) -> f64 {
        self.weights
            .values()
            .copied()
            .chain(self.default)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(String::new()))
    }
}

/// Scales every score by `weight(model) / max_weight`. Order is preserved.
pub fn apply_model_weights(dets: &[Detection], weights: &ModelWeights) -> Result<Vec<Detection>> {
    let missing: Vec<String> = dets
        .iter()
        .filter(|d| weights.get(&d.model_id).is_none())
        .map(|d| d.model_id.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownModel(missing));
    }
    let max = weights.max_weight();
    Ok(dets
        .iter()
        .map(|d| {
            let w = weights.get(&d.model_id).expect("checked above");
            let mut out = d.clone();
            // w == max leaves the score bit-identical
            if w != max {
                out.score = (d.score * w / max).clamp(0.0, 1.0);
            }
            out
        })
        .collect())
}

fn ranked(dets: &[Detection]) -> Vec<Detection> {
    let mut v = dets.to_vec();
    v.sort_by(rank_order);
    v
}

/// Greedy non-maximum suppression.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut remaining = ranked(dets);
    let mut keep = Vec::new();
    while !remaining.is_empty() {
        let top = remaining.remove(0);
        remaining.retain(|d| top.bbox.iou(&d.bbox) <= iou_threshold);
        keep.push(top);
    }
    keep
}

/// Weighted mean of boxes. Computed as an offset from the per-coordinate
/// minimum and clamped to the maximum, so the result always stays inside the
/// members' envelope and coincident boxes are a fixed point. Falls back to an
/// unweighted mean when all weights are zero.
pub(crate) fn weighted_box(members: &[(BBox, f64)]) -> BBox {
    debug_assert!(!members.is_empty());
    let total: f64 = members.iter().map(|(_, w)| w).sum();
    let uniform = total.is_nan() || total <= 0.0;
    let total = if uniform { members.len() as f64 } else { total };

    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let coords = members.iter().map(|(b, _)| b.to_array()[i]);
        let lo = coords.clone().fold(f64::INFINITY, f64::min);
        let hi = coords.fold(f64::NEG_INFINITY, f64::max);
        let offset: f64 = members
            .iter()
            .map(|(b, w)| {
                let w = if uniform { 1.0 } else { *w };
                w * (b.to_array()[i] - lo)
            })
            .sum();
        *slot = (lo + offset / total).clamp(lo, hi);
    }
    let [x_min, y_min, mut x_max, mut y_max] = out;
    x_max = x_max.max(x_min);
    y_max = y_max.max(y_min);
    BBox {
        x_min,
        y_min,
        x_max,
        y_max,
    }
}

/// Non-maximum weighted merging. Each cluster's seed is the best remaining
/// box; members are the remaining boxes with IoU above the threshold against
/// the seed. The merged box is the mean of the seed (weight = its score) and
/// the members (weight = IoU with seed times score). The seed's score is kept.
pub fn nmw(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut remaining = ranked(dets);
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let seed = remaining.remove(0);
        let mut members = vec![(seed.bbox, seed.score)];
        remaining.retain(|d| {
            let overlap = seed.bbox.iou(&d.bbox);
            if overlap > iou_threshold {
                members.push((d.bbox, overlap * d.score));
                false
            } else {
                true
            }
        });
        let mut fused = seed;
        fused.bbox = weighted_box(&members);
        out.push(fused);
    }
    out.sort_by(rank_order);
    out
}

struct WbfCluster {
    members: Vec<Detection>,
    fused: BBox,
}

impl WbfCluster {
    fn refit(&mut self) {
        let pairs: Vec<_> = self.members.iter().map(|d| (d.bbox, d.score)).collect();
        self.fused = weighted_box(&pairs);
    }

    fn into_detection(self) -> Detection {
        let n = self.members.len() as f64;
        let mean = self.members.iter().map(|d| d.score).sum::<f64>() / n;
        let mut head = self.members.into_iter().next().expect("cluster is never empty");
        head.bbox = self.fused;
        head.score = mean.clamp(0.0, 1.0);
        head
    }
}

/// Weighted boxes fusion. Each box joins the fused box it overlaps most
/// (IoU above the threshold; earliest cluster wins a tie) or opens a new
/// cluster. Fused coordinates are the score-weighted mean of all members and
/// the fused score is their arithmetic mean.
pub fn wbf(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut clusters: Vec<WbfCluster> = Vec::new();
    for det in ranked(dets) {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in clusters.iter().enumerate() {
            let overlap = c.fused.iou(&det.bbox);
            if overlap > iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((i, overlap));
            }
        }
        match best {
            Some((i, _)) => {
                clusters[i].members.push(det);
                clusters[i].refit();
            }
            None => clusters.push(WbfCluster {
                fused: det.bbox,
                members: vec![det],
            }),
        }
    }
    let mut out: Vec<_> = clusters.into_iter().map(WbfCluster::into_detection).collect();
    out.sort_by(rank_order);
    out
}

pub fn fuse(dets: &[Detection], method: FusionMethod, iou_threshold: f64) -> Vec<Detection> {
    match method {
        FusionMethod::Nms => nms(dets, iou_threshold),
        FusionMethod::Nmw => nmw(dets, iou_threshold),
        FusionMethod::Wbf => wbf(dets, iou_threshold),
    }
}

/// Ensembles the per-model detection lists of one image: weight, concatenate,
/// drop scores under the floor, then fuse each class separately.
pub fn ensemble(
    per_model: &BTreeMap<String, Vec<Detection>>,
    cfg: &FusionConfig,
    weights: &ModelWeights,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let all: Vec<Detection> = per_model.values().flatten().cloned().collect();
    let weighted = apply_model_weights(&all, weights)?;

    let mut by_class: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in weighted.into_iter().filter(|d| d.score >= cfg.score_floor) {
        by_class.entry(d.class_id).or_default().push(d);
    }
    let mut out: Vec<Detection> = by_class
        .values()
        .flat_map(|dets| fuse(dets, cfg.method, cfg.iou_threshold))
        .collect();
    out.sort_by(rank_order);
    Ok(out)
}

/// Runs [`ensemble`] for every image in a flat detection list. Images are
/// processed in parallel; output is ordered by image id, then rank.
pub fn ensemble_dataset(
    dets: &[Detection],
    cfg: &FusionConfig,
    weights: &ModelWeights,
) -> Result<Vec<Detection>> {
    let mut images: BTreeMap<&str, BTreeMap<String, Vec<Detection>>> = BTreeMap::new();
    for d in dets {
        images
            .entry(d.image_id.as_str())
            .or_default()
            .entry(d.model_id.clone())
            .or_default()
            .push(d.clone());
    }
    let per_image: Vec<Vec<Detection>> = images
        .into_par_iter()
        .map(|(_, per_model)| ensemble(&per_model, cfg, weights))
        .collect::<Result<_>>()?;
    Ok(per_image.into_iter().flatten().collect())
}
