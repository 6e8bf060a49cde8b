use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeError {
    #[error("unknown preset `{0}` (expected svm-d1, xgb-d2 or xgb-encmodel-d3)")]
    UnknownPreset(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter fingerprint mismatch")]
    FingerprintMismatch,
    #[error("vector of length {len} does not fit in {slots} slots")]
    TooManyValues { len: usize, slots: usize },
    #[error("multiplicative depth budget exhausted")]
    DepthExhausted,
    #[error("no Galois key for rotation by {0}")]
    MissingGaloisKey(i64),
    #[error("sum width {0} is not a power of two no larger than the slot count")]
    InvalidSumWidth(usize),
    #[error("ciphertext has {0} parts; expected 2")]
    UnexpectedParts(usize),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("container holds {found}, expected {expected}")]
    WrongObjectType { expected: &'static str, found: u8 },
    #[error("truncated container")]
    Truncated,
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HeError>;
