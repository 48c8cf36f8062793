//! Classification metrics, ROC/AUROC, and detection AP/mAP.

mod classification;
mod detection;
mod roc;

pub use classification::{bce, bce_mean, f1, sigmoid, ConfusionCounts, BCE_EPS};
pub use detection::{
    average_precision, detection_prf, interpolate, match_dataset, match_detections, mean_ap, per_class_ap,
    pr_curve, DetectionPrf, GroundTruthBox, MatchOutcome, MatchResult, PrPoint,
};
pub use roc::{auroc, roc_points, ScoredLabel};
