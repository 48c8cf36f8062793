//! Dataset manifests and patient-wise splitting.
//!
//! Splits are made over patients, never images, so no patient's slices end
//! up on both sides of a train/test boundary.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::imaging::Label;

pub const MANIFEST_SCHEMA: &str = "pedet.manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRef {
    pub path: String,
    /// Number of foreground pixels, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foreground_pixels: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<BBox>,
}

impl ImageEntry {
    pub fn new(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            label: None,
            width: None,
            height: None,
            mask: None,
            annotations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema: String,
    pub patients: Vec<PatientRecord>,
}

impl DatasetManifest {
    pub fn new(patients: Vec<PatientRecord>) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            patients,
        }
    }

    pub fn image_count(&self) -> usize {
        self.patients.iter().map(|p| p.images.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicatePatient { patient_id: String },
    EmptyPatient { patient_id: String },
    DuplicateImage { image_id: String, patients: Vec<String> },
    LabelMaskMismatch { image_id: String, label: Label, mask_blank: bool },
    AnnotationsOnNegative { image_id: String },
    AnnotationOutOfBounds { image_id: String, bbox: BBox, width: u32, height: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DuplicatePatient { patient_id } => write!(f, "patient `{patient_id}` is listed more than once"),
            Self::EmptyPatient { patient_id } => write!(f, "patient `{patient_id}` has no images"),
            Self::DuplicateImage { image_id, patients } => {
                write!(f, "image `{image_id}` is listed under patients {}", patients.join(", "))
            }
            Self::LabelMaskMismatch { image_id, label, mask_blank } => write!(
                f,
                "image `{image_id}` is labeled {label:?} but its mask is {}",
                if *mask_blank { "blank" } else { "non-blank" }
            ),
            Self::AnnotationsOnNegative { image_id } => {
                write!(f, "image `{image_id}` is labeled NonPE but carries annotations")
            }
            Self::AnnotationOutOfBounds { image_id, bbox, width, height } => write!(
                f,
                "annotation {:?} on image `{image_id}` exceeds the {width}x{height} image",
                bbox.to_array()
            ),
        }
    }
}

/// Structural and consistency checks. Violations are returned as data; an
/// empty list means the manifest is consistent.
///
/// Label/mask consistency is only checked where the mask's foreground count
/// is known; callers that have the mask files fill that in first.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_patients = BTreeSet::new();
    let mut owners: BTreeMap<&str, Vec<&str>> = BTreeMap::new();

    for p in &manifest.patients {
        if !seen_patients.insert(p.patient_id.as_str()) {
            out.push(Violation::DuplicatePatient {
                patient_id: p.patient_id.clone(),
            });
        }
        if p.images.is_empty() {
            out.push(Violation::EmptyPatient {
                patient_id: p.patient_id.clone(),
            });
        }
        for img in &p.images {
            owners.entry(&img.image_id).or_default().push(&p.patient_id);

            if let (Some(label), Some(fg)) = (img.label, img.mask.as_ref().and_then(|m| m.foreground_pixels)) {
                let blank = fg == 0;
                if (label == Label::Pe) == blank {
                    out.push(Violation::LabelMaskMismatch {
                        image_id: img.image_id.clone(),
                        label,
                        mask_blank: blank,
                    });
                }
            }
            if img.label == Some(Label::NonPe) && !img.annotations.is_empty() {
                out.push(Violation::AnnotationsOnNegative {
                    image_id: img.image_id.clone(),
                });
            }
            if let (Some(w), Some(h)) = (img.width, img.height) {
                for b in &img.annotations {
                    if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w as f64 || b.y_max > h as f64 {
                        out.push(Violation::AnnotationOutOfBounds {
                            image_id: img.image_id.clone(),
                            bbox: *b,
                            width: w,
                            height: h,
                        });
                    }
                }
            }
        }
    }
    for (image_id, patients) in owners {
        if patients.len() > 1 {
            out.push(Violation::DuplicateImage {
                image_id: image_id.to_string(),
                patients: patients.into_iter().map(String::from).collect(),
            });
        }
    }
    out
}

/// Named split fractions plus the shuffle seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub parts: Vec<(String, f64)>,
    pub seed: u64,
}

const FRACTION_EPS: f64 = 1e-9;

impl SplitSpec {
    pub fn new(parts: Vec<(String, f64)>, seed: u64) -> Result<Self> {
        let spec = Self { parts, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses either `train=0.7,val=0.1,test=0.2` or a bare ratio such as
    /// `80:20` / `70:10:20`. Bare ratios are normalized and named
    /// train/test or train/val/test.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let bad = |why: String| Error::Split(format!("cannot parse split `{text}`: {why}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));

        let parts = if text.contains('=') {
            text.split(',')
                .map(|kv| {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("`{kv}` is not name=fraction")))?;
                    Ok((k.trim().to_string(), num(v)?))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let ratios = text.split(':').map(num).collect::<Result<Vec<_>>>()?;
            let names: &[&str] = match ratios.len() {
                2 => &["train", "test"],
                3 => &["train", "val", "test"],
                n => return Err(bad(format!("{n} unnamed parts; name them as name=fraction"))),
            };
            let total: f64 = ratios.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return Err(bad("ratios must be positive".into()));
            }
            names.iter().zip(ratios).map(|(n, r)| (n.to_string(), r / total)).collect()
        };
        Self::new(parts, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Split("no split parts given".into()));
        }
        let mut names = BTreeSet::new();
        for (name, f) in &self.parts {
            if !names.insert(name) {
                return Err(Error::Split(format!("split `{name}` is named twice")));
            }
            if !(f.is_finite() && *f > 0.0) {
                return Err(Error::Split(format!("split `{name}` has non-positive fraction {f}")));
            }
        }
        let sum: f64 = self.parts.iter().map(|(_, f)| f).sum();
        if (sum - 1.0).abs() > FRACTION_EPS {
            return Err(Error::Split(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` patients. Remainders within
    /// 1e-9 of each other count as equal and go to the earlier part.
    pub fn sizes(&self, n: usize) -> Vec<usize> {
        let quotas: Vec<f64> = self.parts.iter().map(|(_, f)| f * n as f64).collect();
        let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + FRACTION_EPS).floor() as usize).collect();
        let assigned: usize = sizes.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        let rem = |i: usize| (quotas[i] - sizes[i] as f64).max(0.0);
        order.sort_by(|&a, &b| {
            let (ra, rb) = (rem(a), rem(b));
            if (ra - rb).abs() <= FRACTION_EPS {
                a.cmp(&b)
            } else {
                rb.total_cmp(&ra)
            }
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPart {
    pub name: String,
    pub patients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientSplit {
    pub parts: Vec<SplitPart>,
}

impl PatientSplit {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.parts.iter().find(|p| p.name == name).map(|p| p.patients.as_slice())
    }

    pub fn split_of(&self, patient_id: &str) -> Option<&str> {
        self.parts
            .iter()
            .find(|p| p.patients.iter().any(|id| id == patient_id))
            .map(|p| p.name.as_str())
    }
}

/// Fisher-Yates over ChaCha8 seeded with `seed`. Index `j` for position `i`
/// is the high 64 bits of `next_u64() * (i + 1)`.
pub fn seeded_permutation<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        items.swap(i, j);
    }
}

/// Patient-wise split. Patient ids are sorted, shuffled with
/// [`seeded_permutation`], and cut into consecutive runs sized by
/// [`SplitSpec::sizes`]. Each patient lists in its part in shuffled order.
pub fn patient_split(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<PatientSplit> {
    spec.validate()?;
    let mut ids: Vec<String> = manifest.patients.iter().map(|p| p.patient_id.clone()).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Split(format!("patient `{}` is listed more than once", w[0])));
    }
    if spec.parts.len() > ids.len() {
        return Err(Error::Split(format!(
            "{} splits requested but only {} patients available",
            spec.parts.len(),
            ids.len()
        )));
    }
    let sizes = spec.sizes(ids.len());
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Split(format!(
            "split `{}` would be empty with {} patients",
            spec.parts[i].0,
            ids.len()
        )));
    }

    seeded_permutation(&mut ids, spec.seed);
    let mut rest = ids.into_iter();
    let parts = spec
        .parts
        .iter()
        .zip(sizes)
        .map(|((name, _), n)| SplitPart {
            name: name.clone(),
            patients: rest.by_ref().take(n).collect(),
        })
        .collect();
    Ok(PatientSplit { parts })
}

/// Copy of the manifest with every patient tagged by its split.
pub fn tag_manifest(manifest: &DatasetManifest, split: &PatientSplit) -> DatasetManifest {
    let mut out = manifest.clone();
    for p in &mut out.patients {
        p.split = split.split_of(&p.patient_id).map(String::from);
    }
    out
}
