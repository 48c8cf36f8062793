use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use super::config::Config;
use super::report::{comparison_table, evaluate, EvalReport, EvalSettings};
use super::{
    AnnotateArgs, Command, CropArgs, EvalArgs, FuseArgs, GuideArgs, ReportArgs, SplitArgs, ValidateArgs, WindowArgs,
};
use crate::datasets::{patient_split, tag_manifest, validate_manifest, DatasetManifest, SplitSpec, MANIFEST_SCHEMA};
use crate::formats::{
    parse_versioned, to_pretty_json, AnnotationRecord, CropRecord, GroundTruthFile, HeatmapFile, HuSidecar,
    PredictionFile, ValidationRecord, VerdictFile, ANNOTATIONS_SCHEMA, CROP_SCHEMA, VALIDATION_SCHEMA,
};
use crate::fusion::{ensemble_dataset, FusionConfig, FusionMethod, ModelWeights};
use crate::guidance::{guided_filter_dataset, GuidanceConfig};
use crate::imaging::{
    attention_crop, mask_to_annotations, mask_to_label, pgm, window, BinaryMask, GrayImage, Heatmap, HuImage,
    WindowSpec,
};

pub(super) fn dispatch(command: Command, config: &Config) -> Result<()> {
    match command {
        Command::Window(a) => cmd_window(a, config),
        Command::Fuse(a) => cmd_fuse(a, config),
        Command::Guide(a) => cmd_guide(a, config),
        Command::Eval(a) => cmd_eval(a, config),
        Command::Split(a) => cmd_split(a),
        Command::Crop(a) => cmd_crop(a),
        Command::Report(a) => cmd_report(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Annotate(a) => cmd_annotate(a, config),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn relative_to(file: &Path, target: &str) -> PathBuf {
    file.parent().unwrap_or(Path::new(".")).join(target)
}

fn cmd_window(a: WindowArgs, config: &Config) -> Result<()> {
    let default = WindowSpec::default();
    let spec = WindowSpec::new(
        a.level.or(config.window.level).unwrap_or(default.level),
        a.width.or(config.window.width).unwrap_or(default.width),
    )?;
    let sidecar = HuSidecar::parse(&read_text(&a.input)?).with_context(|| a.input.display().to_string())?;
    let raw_path = relative_to(&a.input, &sidecar.data);
    let raw = read_bytes(&raw_path)?;
    let hu = HuImage::from_le_bytes(sidecar.width, sidecar.height, &raw)
        .with_context(|| raw_path.display().to_string())?;
    emit(Some(&a.output), &window(&hu, &spec).to_pgm())
}

/// `name=w,name=w`.
fn parse_weights(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((name, w)) = item.split_once('=') else {
            bail!("weight `{item}` is not of the form name=value");
        };
        let w: f64 = w.trim().parse().with_context(|| format!("weight `{item}`"))?;
        if out.insert(name.trim().to_string(), w).is_some() {
            bail!("model `{}` is weighted twice", name.trim());
        }
    }
    Ok(out)
}

fn cmd_fuse(a: FuseArgs, config: &Config) -> Result<()> {
    let c = &config.fuse;
    let defaults = FusionConfig::default();
    let method: FusionMethod = match a.method.as_deref().or(c.method.as_deref()) {
        Some(m) => m.parse()?,
        None => defaults.method,
    };
    let cfg = FusionConfig {
        method,
        iou_threshold: a.iou_threshold.or(c.iou_threshold).unwrap_or(defaults.iou_threshold),
        score_floor: a.score_floor.or(c.score_floor).unwrap_or(defaults.score_floor),
    };
    cfg.validate()?;

    let explicit = match &a.weights {
        Some(text) => Some(parse_weights(text)?),
        None => c.weights.clone(),
    };
    let default_weight = a.default_weight.or(c.default_weight);
    let weights = match (explicit, default_weight) {
        (None, None) => ModelWeights::uniform(),
        (None, Some(d)) => ModelWeights::new([])?.with_default(d)?,
        (Some(w), None) => ModelWeights::new(w)?,
        (Some(w), Some(d)) => ModelWeights::new(w)?.with_default(d)?,
    };

    let mut all = Vec::new();
    for path in &a.inputs {
        let file = PredictionFile::parse(&read_text(path)?).with_context(|| path.display().to_string())?;
        all.extend(file.detections);
    }
    let models: BTreeSet<&str> = all.iter().map(|d| d.model_id.as_str()).collect();
    for unused in weights.explicit().keys().filter(|m| !models.contains(m.as_str())) {
        eprintln!("warning: weight given for `{unused}` but no input has that model");
    }

    let fused = ensemble_dataset(&all, &cfg, &weights)?;
    eprintln!(
        "fuse: {} detections from {} models -> {} ({}, IoU {})",
        all.len(),
        models.len(),
        fused.len(),
        cfg.method,
        cfg.iou_threshold
    );
    emit(a.output.as_deref(), PredictionFile::new(fused).to_text().as_bytes())
}

fn cmd_guide(a: GuideArgs, config: &Config) -> Result<()> {
    let defaults = GuidanceConfig::default();
    let cfg = GuidanceConfig {
        theta: a.theta.or(config.guide.theta).unwrap_or(defaults.theta),
        conf_floor: a.conf_floor.or(config.guide.conf_floor).unwrap_or(defaults.conf_floor),
    };
    let preds = PredictionFile::parse(&read_text(&a.predictions)?).with_context(|| a.predictions.display().to_string())?;
    let verdicts = VerdictFile::parse(&read_text(&a.verdicts)?).with_context(|| a.verdicts.display().to_string())?;
    let verdicts = verdicts.by_image();

    let kept = guided_filter_dataset(&preds.by_image(), &verdicts, &cfg)?;

    // Reassemble in input order; the filter keeps relative order per image.
    let mut queues: BTreeMap<String, VecDeque<_>> = kept.into_iter().map(|(k, v)| (k, v.into())).collect();
    let mut out = Vec::new();
    for d in &preds.detections {
        let q = queues.get_mut(&d.image_id).expect("every image is filtered");
        if q.front() == Some(d) {
            out.push(q.pop_front().expect("front exists"));
        }
    }
    let gated = verdicts.values().filter(|v| v.p_f < cfg.theta).count();
    eprintln!(
        "guide: kept {} of {} detections; {} of {} images below theta {}",
        out.len(),
        preds.detections.len(),
        gated,
        verdicts.len(),
        cfg.theta
    );
    emit(a.output.as_deref(), PredictionFile::new(out).to_text().as_bytes())
}

fn cmd_eval(a: EvalArgs, config: &Config) -> Result<()> {
    let c = &config.eval;
    let defaults = EvalSettings::default();
    let settings = EvalSettings {
        iou_thresholds: a
            .iou_thresholds
            .or_else(|| c.iou_thresholds.clone())
            .unwrap_or(defaults.iou_thresholds),
        score_threshold: a.score_threshold.or(c.score_threshold).unwrap_or(defaults.score_threshold),
        theta: a.theta.or(c.theta).unwrap_or(defaults.theta),
    };
    let preds = PredictionFile::parse(&read_text(&a.predictions)?).with_context(|| a.predictions.display().to_string())?;
    let gt = GroundTruthFile::parse(&read_text(&a.ground_truth)?).with_context(|| a.ground_truth.display().to_string())?;
    let verdicts = match &a.verdicts {
        Some(p) => Some(
            VerdictFile::parse(&read_text(p)?)
                .with_context(|| p.display().to_string())?
                .by_image(),
        ),
        None => None,
    };

    let known: BTreeSet<&str> = gt.images.iter().map(|i| i.image_id.as_str()).collect();
    let stray = preds
        .detections
        .iter()
        .filter(|d| !known.contains(d.image_id.as_str()))
        .count();
    if stray > 0 {
        eprintln!("warning: {stray} predictions are on images absent from the ground truth; counted as false positives");
    }

    let report = evaluate(&preds.detections, &gt, verdicts.as_ref(), &settings)?;
    for b in &report.detection {
        eprintln!(
            "{}: {:.4}  precision {:.4}  sensitivity {:.4}  F1 {:.4}",
            b.name, b.map, b.precision, b.sensitivity, b.f1
        );
    }
    emit(a.output.as_deref(), to_pretty_json(&report).as_bytes())
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    parse_versioned(&read_text(path)?, MANIFEST_SCHEMA, "manifest").with_context(|| path.display().to_string())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let spec = SplitSpec::parse(&a.ratios, a.seed)?;
    let split = patient_split(&manifest, &spec)?;
    let tagged = tag_manifest(&manifest, &split);
    for part in &split.parts {
        let images: usize = tagged
            .patients
            .iter()
            .filter(|p| p.split.as_deref() == Some(part.name.as_str()))
            .map(|p| p.images.len())
            .sum();
        eprintln!("{}: {} patients, {} images", part.name, part.patients.len(), images);
    }
    emit(a.output.as_deref(), to_pretty_json(&tagged).as_bytes())
}

fn cmd_crop(a: CropArgs) -> Result<()> {
    let file = HeatmapFile::parse(&read_text(&a.heatmap)?).with_context(|| a.heatmap.display().to_string())?;
    if a.image_width == 0 || a.image_height == 0 {
        bail!("image size must be positive");
    }
    let heatmap = Heatmap::from_feature_map(file.width, file.height, file.values)?;
    let crop = attention_crop(&heatmap, a.image_width, a.image_height);
    let record = CropRecord {
        schema: CROP_SCHEMA.into(),
        image_width: a.image_width,
        image_height: a.image_height,
        bbox: crop.bbox,
        threshold: crop.threshold,
        fallback: crop.fallback,
    };
    emit(a.output.as_deref(), to_pretty_json(&record).as_bytes())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if let Some(labels) = &a.labels {
        if labels.len() != a.reports.len() {
            bail!("{} labels given for {} reports", labels.len(), a.reports.len());
        }
    }
    let mut rows = Vec::new();
    for (i, path) in a.reports.iter().enumerate() {
        let report = EvalReport::parse(&read_text(path)?).with_context(|| path.display().to_string())?;
        let label = match &a.labels {
            Some(l) => l[i].clone(),
            None => path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
        };
        rows.push((label, report));
    }
    emit(a.output.as_deref(), comparison_table(&rows).as_bytes())
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    let (w, h, px) = pgm::decode(&read_bytes(path)?).with_context(|| path.display().to_string())?;
    Ok(BinaryMask::from_gray(&GrayImage::new(w, h, px)?))
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let mut manifest = load_manifest(&a.manifest)?;
    for image in manifest.patients.iter_mut().flat_map(|p| p.images.iter_mut()) {
        if let Some(mask) = image.mask.as_mut().filter(|m| m.foreground_pixels.is_none()) {
            let path = relative_to(&a.manifest, &mask.path);
            mask.foreground_pixels = Some(load_mask(&path)?.count() as u64);
        }
    }
    let violations = validate_manifest(&manifest);
    for v in &violations {
        eprintln!("violation: {v}");
    }
    eprintln!(
        "validate: {} patients, {} images, {} violations",
        manifest.patients.len(),
        manifest.image_count(),
        violations.len()
    );
    let record = ValidationRecord {
        schema: VALIDATION_SCHEMA.into(),
        ok: violations.is_empty(),
        violations,
    };
    emit(a.output.as_deref(), to_pretty_json(&record).as_bytes())
}

fn cmd_annotate(a: AnnotateArgs, config: &Config) -> Result<()> {
    let margin = a.margin.or(config.annotate.margin).unwrap_or(5);
    let mask = load_mask(&a.mask)?;
    let record = AnnotationRecord {
        schema: ANNOTATIONS_SCHEMA.into(),
        width: mask.width(),
        height: mask.height(),
        label: mask_to_label(&mask),
        margin,
        boxes: mask_to_annotations(&mask, margin),
    };
    emit(a.output.as_deref(), to_pretty_json(&record).as_bytes())
}
