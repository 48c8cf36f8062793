use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("score {0} is outside [0, 1]")]
    InvalidScore(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no weight configured for model(s): {}", .0.join(", "))]
    UnknownModel(Vec<String>),

    #[error("detection for image `{found}` passed to the verdict for image `{expected}`")]
    ImageMismatch { expected: String, found: String },

    #[error("missing classifier verdict for image(s): {}", .0.join(", "))]
    MissingVerdicts(Vec<String>),

    #[error("scores carry only the {0} class; both classes are required")]
    SingleClass(&'static str),

    #[error("no ground-truth boxes in the dataset")]
    NoGroundTruth,

    #[error("nothing to average: empty per-class AP map")]
    EmptyClassMap,

    #[error("image data: {0}")]
    Image(String),

    #[error("dataset split: {0}")]
    Split(String),
}
