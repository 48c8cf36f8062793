//! Evaluation reports and the side-by-side comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{parse_versioned, GroundTruthFile, REPORT_SCHEMA};
use crate::geometry::Detection;
use crate::guidance::ClassifierVerdict;
use crate::metrics::{
    auroc, detection_prf, match_dataset, mean_ap, per_class_ap, pr_curve, roc_points, ConfusionCounts, MatchResult,
    PrPoint, ScoredLabel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub iou_thresholds: Vec<f64>,
    pub score_threshold: f64,
    /// Only used when verdicts are supplied.
    pub theta: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.2, 0.5],
            score_threshold: 0.005,
            theta: 0.5,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::Config("at least one IoU threshold is required".into()));
        }
        if let Some(t) = self.iou_thresholds.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Config(format!("IoU threshold must lie in [0, 1), got {t}")));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config(format!(
                "score threshold must lie in [0, 1], got {}",
                self.score_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub images: usize,
    pub predictions: usize,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBlock {
    /// `mAP20` for IoU 0.2 and so on.
    pub name: String,
    pub iou_threshold: f64,
    pub map: f64,
    pub ap: BTreeMap<u32, f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
    pub degenerate: Vec<String>,
    pub pr_curve: BTreeMap<u32, Vec<PrPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationBlock {
    pub theta: f64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Absent when only one class is present.
    pub auroc: Option<f64>,
    pub degenerate: Vec<String>,
    pub roc_curve: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub settings: EvalSettings,
    pub summary: Summary,
    pub detection: Vec<DetectionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationBlock>,
}

impl EvalReport {
    pub fn parse(text: &str) -> Result<Self> {
        parse_versioned(text, REPORT_SCHEMA, "evaluation report")
    }
}

/// `0.2` becomes `mAP20`.
pub fn map_name(iou_threshold: f64) -> String {
    format!("mAP{}", (iou_threshold * 100.0).round() as i64)
}

pub fn evaluate(
    preds: &[Detection],
    gt: &GroundTruthFile,
    verdicts: Option<&BTreeMap<String, ClassifierVerdict>>,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    settings.validate()?;
    let boxes = gt.boxes();
    if boxes.is_empty() {
        return Err(Error::NoGroundTruth);
    }

    let detection = settings
        .iou_thresholds
        .iter()
        .map(|&t| detection_block(preds, &boxes, t, settings.score_threshold))
        .collect::<Result<_>>()?;

    let classification = verdicts
        .map(|v| classification_block(gt, v, settings.theta))
        .transpose()?;

    Ok(EvalReport {
        schema: REPORT_SCHEMA.into(),
        settings: settings.clone(),
        summary: Summary {
            images: gt.images.len(),
            predictions: preds.len(),
            ground_truth: boxes.len(),
        },
        detection,
        classification,
    })
}

fn detection_block(
    preds: &[Detection],
    boxes: &[crate::metrics::GroundTruthBox],
    iou_threshold: f64,
    score_threshold: f64,
) -> Result<DetectionBlock> {
    let results = match_dataset(preds, boxes, iou_threshold);
    let ap = per_class_ap(&results)?;
    let map = mean_ap(&ap)?;
    let prf = detection_prf(&results, score_threshold);
    let per_class: Vec<(u32, Vec<MatchResult>)> = ap
        .keys()
        .map(|&c| (c, results.iter().map(|r| r.for_class(c)).collect()))
        .collect();
    let pr_curve = per_class
        .into_iter()
        .map(|(c, rs)| Ok((c, pr_curve(&rs)?)))
        .collect::<Result<_>>()?;
    Ok(DetectionBlock {
        name: map_name(iou_threshold),
        iou_threshold,
        map,
        ap,
        tp: prf.counts.tp,
        fp: prf.counts.fp,
        fn_: prf.counts.fn_,
        precision: prf.precision,
        sensitivity: prf.sensitivity,
        f1: prf.f1,
        degenerate: prf.degenerate,
        pr_curve,
    })
}

/// Image-level scores: an image is positive when it has any ground-truth box.
fn classification_block(
    gt: &GroundTruthFile,
    verdicts: &BTreeMap<String, ClassifierVerdict>,
    theta: f64,
) -> Result<ClassificationBlock> {
    let missing: Vec<String> = gt
        .images
        .iter()
        .filter(|img| !verdicts.contains_key(&img.image_id))
        .map(|img| img.image_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVerdicts(missing));
    }
    let data: Vec<ScoredLabel> = gt
        .images
        .iter()
        .map(|img| ScoredLabel::new(verdicts[&img.image_id].p_f, !img.boxes.is_empty()))
        .collect();
    let counts = ConfusionCounts::from_scores(&data, theta);
    let mut degenerate: Vec<String> = counts.degenerate().into_iter().map(String::from).collect();
    let (auroc, roc_curve) = match (auroc(&data), roc_points(&data)) {
        (Ok(a), Ok(pts)) => (Some(a), pts.into_iter().map(|(x, y)| [x, y]).collect()),
        _ => {
            degenerate.push("auroc".into());
            (None, Vec::new())
        }
    };
    Ok(ClassificationBlock {
        theta,
        counts,
        accuracy: counts.accuracy(),
        precision: counts.precision(),
        sensitivity: counts.sensitivity(),
        specificity: counts.specificity(),
        f1: counts.f1(),
        auroc,
        degenerate,
        roc_curve,
    })
}

/// Renders one row per report. Precision, sensitivity and F1 come from each
/// report's first detection block; there is one mAP column per IoU threshold
/// seen in any report.
pub fn comparison_table(rows: &[(String, EvalReport)]) -> String {
    let mut names: Vec<(i64, String)> = rows
        .iter()
        .flat_map(|(_, r)| r.detection.iter())
        .map(|b| ((b.iou_threshold * 100.0).round() as i64, b.name.clone()))
        .collect();
    names.sort();
    names.dedup();

    let mut header = vec!["Method".to_string(), "Precision".into(), "Sensitivity".into(), "F1".into()];
    header.extend(names.iter().map(|(_, n)| n.clone()));
    let mut cells = vec![header];
    for (label, report) in rows {
        let mut row = vec![label.clone()];
        match report.detection.first() {
            Some(b) => row.extend([b.precision, b.sensitivity, b.f1].map(|v| format!("{v:.3}"))),
            None => row.extend(std::iter::repeat_n("-".to_string(), 3)),
        }
        for (_, name) in &names {
            row.push(
                report
                    .detection
                    .iter()
                    .find(|b| &b.name == name)
                    .map_or("-".into(), |b| format!("{:.3}", b.map)),
            );
        }
        cells.push(row);
    }

    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    out
}
