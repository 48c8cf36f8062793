//! Detection ensembling, classifier-guided filtering and evaluation for
//! pulmonary embolism detection on CT pulmonary angiography slices.
//!
//! The crate sits downstream of model inference: it fuses per-model box
//! lists, gates them on an image-level classifier probability, scores the
//! result, and provides the CT preprocessing and dataset-splitting helpers
//! used to build the inputs.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod formats;
pub mod fusion;
pub mod geometry;
pub mod guidance;
pub mod imaging;
pub mod metrics;

pub use error::{Error, Result};
pub use geometry::{BBox, Detection};
