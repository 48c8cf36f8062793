//! Prediction-to-ground-truth matching and the precision/recall metrics
//! built on it.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classification::{f1, ConfusionCounts};
use crate::error::{Error, Result};
use crate::geometry::{rank_order, BBox, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub class_id: u32,
    pub score: f64,
    pub true_positive: bool,
}

/// Matching of one image's predictions against its ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub iou_threshold: f64,
    /// One entry per prediction, in rank order.
    pub outcomes: Vec<MatchOutcome>,
    /// Ground-truth box count per class.
    pub ground_truth: BTreeMap<u32, usize>,
}

impl MatchResult {
    pub fn num_ground_truth(&self) -> usize {
        self.ground_truth.values().sum()
    }

    pub fn true_positives(&self) -> usize {
        self.outcomes.iter().filter(|o| o.true_positive).count()
    }

    pub fn false_positives(&self) -> usize {
        self.outcomes.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.num_ground_truth() - self.true_positives()
    }

    pub fn for_class(&self, class_id: u32) -> MatchResult {
        MatchResult {
            iou_threshold: self.iou_threshold,
            outcomes: self.outcomes.iter().filter(|o| o.class_id == class_id).copied().collect(),
            ground_truth: self
                .ground_truth
                .get(&class_id)
                .map(|&n| BTreeMap::from([(class_id, n)]))
                .unwrap_or_default(),
        }
    }
}

/// Greedy matching. Predictions are visited in rank order; each takes the
/// unmatched ground truth of the same image and class with the highest IoU,
/// provided that IoU is strictly above `iou_threshold`. Ties between ground
/// truths go to the one listed first.
pub fn match_detections(preds: &[Detection], gts: &[GroundTruthBox], iou_threshold: f64) -> MatchResult {
    let mut ranked: Vec<&Detection> = preds.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));

    let mut taken = vec![false; gts.len()];
    let mut outcomes = Vec::with_capacity(ranked.len());
    for p in ranked {
        let mut best: Option<(usize, f64)> = None;
        for (j, gt) in gts.iter().enumerate() {
            if taken[j] || gt.class_id != p.class_id || gt.image_id != p.image_id {
                continue;
            }
            let overlap = p.bbox.iou(&gt.bbox);
            if overlap > iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((j, overlap));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
        }
        outcomes.push(MatchOutcome {
            class_id: p.class_id,
            score: p.score,
            true_positive: best.is_some(),
        });
    }

    let mut ground_truth = BTreeMap::new();
    for gt in gts {
        *ground_truth.entry(gt.class_id).or_insert(0) += 1;
    }
    MatchResult {
        iou_threshold,
        outcomes,
        ground_truth,
    }
}

/// Groups predictions and ground truth by image and matches each image.
/// Results come back ordered by image id.
pub fn match_dataset(preds: &[Detection], gts: &[GroundTruthBox], iou_threshold: f64) -> Vec<MatchResult> {
    let mut images: BTreeMap<&str, (Vec<Detection>, Vec<GroundTruthBox>)> = BTreeMap::new();
    for p in preds {
        images.entry(&p.image_id).or_default().0.push(p.clone());
    }
    for g in gts {
        images.entry(&g.image_id).or_default().1.push(g.clone());
    }
    images
        .into_par_iter()
        .map(|(_, (p, g))| match_detections(&p, &g, iou_threshold))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall at every distinct score threshold, highest first.
/// Predictions with equal scores enter the curve together, so the curve
/// does not depend on how tied predictions happen to be ordered.
pub fn pr_curve(results: &[MatchResult]) -> Result<Vec<PrPoint>> {
    let total_gt: usize = results.iter().map(MatchResult::num_ground_truth).sum();
    if total_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut outcomes: Vec<&MatchOutcome> = results.iter().flat_map(|r| &r.outcomes).collect();
    outcomes.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = Vec::new();
    let mut tp = 0usize;
    for (i, o) in outcomes.iter().enumerate() {
        tp += o.true_positive as usize;
        let group_ends = outcomes
            .get(i + 1)
            .is_none_or(|next| next.score.total_cmp(&o.score).is_ne());
        if group_ends {
            points.push(PrPoint {
                threshold: o.score,
                recall: tp as f64 / total_gt as f64,
                precision: tp as f64 / (i + 1) as f64,
            });
        }
    }
    Ok(points)
}

/// Monotone precision envelope: each point's precision becomes the maximum
/// precision at any equal or higher recall.
pub fn interpolate(points: &[PrPoint]) -> Vec<PrPoint> {
    let mut out = points.to_vec();
    let mut running = 0.0f64;
    for p in out.iter_mut().rev() {
        running = running.max(p.precision);
        p.precision = running;
    }
    out
}

/// Area under the interpolated precision/recall curve (all-point
/// interpolation) over predictions pooled from every image.
pub fn average_precision(results: &[MatchResult]) -> Result<f64> {
    let env = interpolate(&pr_curve(results)?);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in &env {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(ap.clamp(0.0, 1.0))
}

/// AP for each class that has ground truth.
pub fn per_class_ap(results: &[MatchResult]) -> Result<BTreeMap<u32, f64>> {
    let classes: BTreeSet<u32> = results
        .iter()
        .flat_map(|r| r.ground_truth.iter().filter(|(_, &n)| n > 0).map(|(&c, _)| c))
        .collect();
    if classes.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    classes
        .into_iter()
        .map(|c| {
            let subset: Vec<_> = results.iter().map(|r| r.for_class(c)).collect();
            average_precision(&subset).map(|ap| (c, ap))
        })
        .collect()
}

pub fn mean_ap<K>(per_class: &BTreeMap<K, f64>) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::EmptyClassMap);
    }
    Ok(per_class.values().sum::<f64>() / per_class.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPrf {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub degenerate: Vec<String>,
}

/// Operating-point precision, sensitivity and F1 from counts pooled over
/// the dataset, keeping predictions with `score >= score_threshold`.
///
/// Matching visits predictions from the highest score down, so dropping the
/// low-scoring tail after matching gives the same counts as filtering first.
pub fn detection_prf(results: &[MatchResult], score_threshold: f64) -> DetectionPrf {
    let mut counts = ConfusionCounts::default();
    for r in results {
        let tp = r
            .outcomes
            .iter()
            .filter(|o| o.score >= score_threshold && o.true_positive)
            .count() as u64;
        let kept = r.outcomes.iter().filter(|o| o.score >= score_threshold).count() as u64;
        counts += ConfusionCounts::new(tp, 0, kept - tp, r.num_ground_truth() as u64 - tp);
    }
    let precision = counts.precision();
    let sensitivity = counts.sensitivity();
    DetectionPrf {
        counts,
        precision,
        sensitivity,
        f1: f1(precision, sensitivity),
        degenerate: counts
            .degenerate()
            .into_iter()
            .filter(|f| matches!(*f, "precision" | "sensitivity"))
            .map(String::from)
            .collect(),
    }
}
