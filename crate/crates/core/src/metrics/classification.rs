use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Confusion-matrix counts. Ratios with a zero denominator evaluate to 0;
/// [`ConfusionCounts::degenerate`] names which ones that happened to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    /// Counts for binary predictions `score >= threshold`.
    pub fn from_scores<'a>(data: impl IntoIterator<Item = &'a super::ScoredLabel>, threshold: f64) -> Self {
        let mut c = Self::default();
        for s in data {
            match (s.score >= threshold, s.label) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.sensitivity())
    }

    /// Names of the ratios whose denominator is zero.
    pub fn degenerate(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if self.total() == 0 {
            flags.push("accuracy");
        }
        if self.tp + self.fp == 0 {
            flags.push("precision");
        }
        if self.tp + self.fn_ == 0 {
            flags.push("sensitivity");
        }
        if self.tn + self.fp == 0 {
            flags.push("specificity");
        }
        flags
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub const BCE_EPS: f64 = 1e-12;

/// Binary cross-entropy of one probability against a 0/1 label.
pub fn bce(p: f64, label: bool) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Multi-label BCE averaged over the `C` class outputs of one image.
/// Returns 0 for an empty input.
pub fn bce_mean(probs: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "one label per class output");
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().zip(labels).map(|(&p, &l)| bce(p, l)).sum::<f64>() / probs.len() as f64
}
