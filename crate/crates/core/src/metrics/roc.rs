use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub score: f64,
    /// true = PE
    pub label: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, label: bool) -> Self {
        Self { score, label }
    }
}

/// (FP, TP) count pairs plus the positive and negative totals.
type RocCounts = (Vec<(u64, u64)>, u64, u64);

/// Cumulative (false positive, true positive) counts after admitting every
/// sample scoring at or above each distinct threshold, highest first.
/// Starts at (0, 0) and ends at (N, P).
fn roc_counts(data: &[ScoredLabel]) -> Result<RocCounts> {
    let pos = data.iter().filter(|s| s.label).count() as u64;
    let neg = data.len() as u64 - pos;
    if pos == 0 {
        return Err(Error::SingleClass("negative"));
    }
    if neg == 0 {
        return Err(Error::SingleClass("positive"));
    }

    let mut sorted: Vec<&ScoredLabel> = data.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![(0, 0)];
    let (mut fp, mut tp) = (0u64, 0u64);
    for (i, s) in sorted.iter().enumerate() {
        if s.label {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = sorted
            .get(i + 1)
            .is_none_or(|next| next.score.total_cmp(&s.score).is_ne());
        if group_ends {
            points.push((fp, tp));
        }
    }
    Ok((points, pos, neg))
}

/// ROC curve as (FPR, TPR) points, one per distinct score threshold, with
/// both endpoints included.
pub fn roc_points(data: &[ScoredLabel]) -> Result<Vec<(f64, f64)>> {
    let (counts, pos, neg) = roc_counts(data)?;
    Ok(counts
        .into_iter()
        .map(|(fp, tp)| (fp as f64 / neg as f64, tp as f64 / pos as f64))
        .collect())
}

/// Area under the ROC curve by the trapezoid rule over [`roc_points`].
///
/// The sum is accumulated on integer counts and divided once, so ties
/// contribute exactly one half per (positive, negative) pair.
pub fn auroc(data: &[ScoredLabel]) -> Result<f64> {
    let (counts, pos, neg) = roc_counts(data)?;
    let twice_area: u128 = counts
        .windows(2)
        .map(|w| {
            let (fp0, tp0) = w[0];
            let (fp1, tp1) = w[1];
            (fp1 - fp0) as u128 * (tp0 + tp1) as u128
        })
        .sum();
    Ok(twice_area as f64 / (2.0 * pos as f64 * neg as f64))
}
