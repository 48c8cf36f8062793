use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

/// Defaults read from a TOML file. Command-line flags take precedence.
///
/// ```toml
/// [fuse]
/// method = "wbf"
/// iou_threshold = 0.3
/// weights = { effdet = 3.0, yolov8l = 2.5, frcnn = 1.0 }
///
/// [eval]
/// iou_thresholds = [0.2, 0.5]
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub fuse: FuseSection,
    #[serde(default)]
    pub guide: GuideSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub annotate: AnnotateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub level: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseSection {
    pub method: Option<String>,
    pub iou_threshold: Option<f64>,
    pub score_floor: Option<f64>,
    pub weights: Option<BTreeMap<String, f64>>,
    pub default_weight: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideSection {
    pub theta: Option<f64>,
    pub conf_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub iou_thresholds: Option<Vec<f64>>,
    pub score_threshold: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateSection {
    pub margin: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
