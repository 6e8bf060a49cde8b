use std::fmt;

use hedgerow_he::HeError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CRYPTO: i32 = 4;

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn crypto(message: impl Into<String>) -> Self {
        Self { code: EXIT_CRYPTO, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn he_code(e: &HeError) -> i32 {
    match e {
        HeError::UnknownPreset(_) => EXIT_USAGE,
        HeError::FingerprintMismatch
        | HeError::DepthExhausted
        | HeError::MissingGaloisKey(_)
        | HeError::InvalidSumWidth(_) => EXIT_CRYPTO,
        _ => EXIT_VALIDATION,
    }
}

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<hedgerow::Error>() {
            return match e {
                hedgerow::Error::He(he) => he_code(he),
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<HeError>() {
            return he_code(e);
        }
    }
    EXIT_VALIDATION
}
