//! On-disk formats. Every file is JSON with a versioned `schema` field and
//! every float is written with exactly six decimals. Field names are
//! documented in `docs/FORMATS.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::datasets::Violation;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection};
use crate::guidance::ClassifierVerdict;
use crate::imaging::Label;
use crate::metrics::GroundTruthBox;

pub const PREDICTIONS_SCHEMA: &str = "pedet.predictions/1";
pub const VERDICTS_SCHEMA: &str = "pedet.verdicts/1";
pub const GROUND_TRUTH_SCHEMA: &str = "pedet.ground-truth/1";
pub const HEATMAP_SCHEMA: &str = "pedet.heatmap/1";
pub const HU_SCHEMA: &str = "pedet.hu/1";
pub const CROP_SCHEMA: &str = "pedet.crop/1";
pub const REPORT_SCHEMA: &str = "pedet.eval-report/1";
pub const ANNOTATIONS_SCHEMA: &str = "pedet.annotations/1";
pub const VALIDATION_SCHEMA: &str = "pedet.validation/1";

/// Wraps a serde_json formatter and prints floats as `{:.6}`.
struct SixDecimals<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for SixDecimals<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // avoid "-0.000000"
        let v = if value == 0.0 { 0.0 } else { value };
        let s = format!("{v:.6}");
        writer.write_all(if s == "-0.000000" { b"0.000000" } else { s.as_bytes() })
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

fn serialize_with<T: Serialize + ?Sized, F: Formatter>(value: &T, fmt: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SixDecimals(fmt));
    value.serialize(&mut ser).expect("in-memory serialization does not fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Indented JSON, newline-terminated.
pub fn to_pretty_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serialize_with(value, PrettyFormatter::with_indent(b"  "));
    s.push('\n');
    s
}

pub fn to_compact_json<T: Serialize + ?Sized>(value: &T) -> String {
    serialize_with(value, CompactFormatter)
}

/// A schema header followed by one compact record per line:
///
/// ```text
/// {
///   "schema": "...",
///   "<field>": [
///     {...},
///     {...}
///   ]
/// }
/// ```
fn record_list<T: Serialize>(schema: &str, field: &str, items: &[T]) -> String {
    let mut out = format!("{{\n  \"schema\": {},\n  \"{field}\": [", to_compact_json(schema));
    for (i, item) in items.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&to_compact_json(item));
    }
    out.push_str(if items.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
    out
}

#[derive(Deserialize)]
struct Envelope {
    schema: Option<String>,
}

/// Parses `text` after checking its `schema` field.
pub fn parse_versioned<T: DeserializeOwned>(text: &str, expected: &str, what: &str) -> Result<T> {
    let env: Envelope = serde_json::from_str(text).map_err(|e| json_error(what, e))?;
    match env.schema.as_deref() {
        Some(s) if s == expected => {}
        Some(s) => return Err(Error::Config(format!("{what}: schema `{s}` is not `{expected}`"))),
        None => return Err(Error::Config(format!("{what}: missing `schema` field (expected `{expected}`)"))),
    }
    serde_json::from_str(text).map_err(|e| json_error(what, e))
}

fn json_error(what: &str, e: serde_json::Error) -> Error {
    Error::Config(format!("{what}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub schema: String,
    pub detections: Vec<Detection>,
}

impl PredictionFile {
    pub fn new(detections: Vec<Detection>) -> Self {
        Self {
            schema: PREDICTIONS_SCHEMA.into(),
            detections,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = parse_versioned(text, PREDICTIONS_SCHEMA, "prediction file")?;
        for (i, d) in file.detections.iter().enumerate() {
            d.validate()
                .map_err(|e| Error::Config(format!("prediction file: detection {i}: {e}")))?;
        }
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        record_list(&self.schema, "detections", &self.detections)
    }

    pub fn by_image(&self) -> BTreeMap<String, Vec<Detection>> {
        let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
        for d in &self.detections {
            out.entry(d.image_id.clone()).or_default().push(d.clone());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub schema: String,
    pub verdicts: Vec<ClassifierVerdict>,
}

impl VerdictFile {
    pub fn new(verdicts: Vec<ClassifierVerdict>) -> Self {
        Self {
            schema: VERDICTS_SCHEMA.into(),
            verdicts,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = parse_versioned(text, VERDICTS_SCHEMA, "verdict file")?;
        let mut seen = BTreeSet::new();
        for v in &file.verdicts {
            ClassifierVerdict::new(v.image_id.clone(), v.p_f)
                .map_err(|e| Error::Config(format!("verdict file: image `{}`: {e}", v.image_id)))?;
            if !seen.insert(&v.image_id) {
                return Err(Error::Config(format!("verdict file: image `{}` appears twice", v.image_id)));
            }
        }
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        record_list(&self.schema, "verdicts", &self.verdicts)
    }

    pub fn by_image(&self) -> BTreeMap<String, ClassifierVerdict> {
        self.verdicts.iter().map(|v| (v.image_id.clone(), v.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtImage {
    pub image_id: String,
    #[serde(default)]
    pub boxes: Vec<GtBox>,
}

/// Ground truth per image. Images listed with no boxes are negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub schema: String,
    pub images: Vec<GtImage>,
}

impl GroundTruthFile {
    pub fn new(images: Vec<GtImage>) -> Self {
        Self {
            schema: GROUND_TRUTH_SCHEMA.into(),
            images,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = parse_versioned(text, GROUND_TRUTH_SCHEMA, "ground-truth file")?;
        let mut seen = BTreeSet::new();
        for img in &file.images {
            if !seen.insert(&img.image_id) {
                return Err(Error::Config(format!(
                    "ground-truth file: image `{}` appears twice",
                    img.image_id
                )));
            }
        }
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        record_list(&self.schema, "images", &self.images)
    }

    pub fn boxes(&self) -> Vec<GroundTruthBox> {
        self.images
            .iter()
            .flat_map(|img| {
                img.boxes.iter().map(|b| GroundTruthBox {
                    image_id: img.image_id.clone(),
                    class_id: b.class_id,
                    bbox: b.bbox,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapFile {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    /// Row-major raw feature-map values; min-max normalized on load.
    pub values: Vec<f64>,
}

impl HeatmapFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_versioned(text, HEATMAP_SCHEMA, "heatmap file")
    }
}

/// Sidecar describing a raw little-endian i16 HU slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuSidecar {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub byte_order: String,
    pub dtype: String,
    /// Raw file path, relative to the sidecar's directory.
    pub data: String,
}

impl HuSidecar {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Self = parse_versioned(text, HU_SCHEMA, "HU sidecar")?;
        if s.byte_order != "little" {
            return Err(Error::Config(format!(
                "HU sidecar: byte_order `{}` unsupported (only `little`)",
                s.byte_order
            )));
        }
        if s.dtype != "i16" {
            return Err(Error::Config(format!("HU sidecar: dtype `{}` unsupported (only `i16`)", s.dtype)));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub schema: String,
    pub image_width: usize,
    pub image_height: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub threshold: u8,
    pub fallback: bool,
}

/// Label and boxes derived from one lesion mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub label: Label,
    pub margin: usize,
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub schema: String,
    pub ok: bool,
    pub violations: Vec<Violation>,
}
