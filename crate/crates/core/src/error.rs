use hedgerow_he::HeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    He(#[from] HeError),
    #[error("copy-number value {0} outside -2..=2")]
    CopyNumberOutOfRange(i64),
    #[error("split threshold {0} is not -0.5 or +0.5")]
    InadmissibleThreshold(f64),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("aggregate bound {bound} exceeds the plaintext half-range; a plaintext modulus of at least {required_bits} bits is required")]
    Overflow { bound: u128, required_bits: u32 },
    #[error("feature index {index} out of range for {features} features")]
    FeatureOutOfRange { index: usize, features: usize },
    #[error("stream shape mismatch: {0}")]
    Shape(String),
    #[error("empty score vector")]
    EmptyScores,
    #[error("pooled labels contain only one class")]
    DegenerateLabels,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
