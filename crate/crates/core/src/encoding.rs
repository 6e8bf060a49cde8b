//! Ternary feature encoding and the arithmetized less-than gadget.
//!
//! A ternary feature `v` is one-hot coded as `(x2, x1, x0)`; a split
//! threshold `±0.5` as a single bit `y`. The comparison `v < threshold` is
//! then the polynomial `z = (1 - x0)(x2 (y - 1) - y) + 1`, which never reads
//! `x1`.

use hedgerow_he::{Backend, PackedPlaintext};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TernaryFeature {
    Deletion,
    Neutral,
    Amplification,
}

impl TernaryFeature {
    pub const ALL: [TernaryFeature; 3] = [Self::Deletion, Self::Neutral, Self::Amplification];

    pub fn value(self) -> i64 {
        match self {
            Self::Deletion => -1,
            Self::Neutral => 0,
            Self::Amplification => 1,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Self::Deletion),
            0 => Some(Self::Neutral),
            1 => Some(Self::Amplification),
            _ => None,
        }
    }
}

/// Collapses copy-number states `-2..=2` to deletion / neutral / amplification.
pub fn normalize_copy_number(raw: i64) -> Result<TernaryFeature> {
    match raw {
        -2 | -1 => Ok(TernaryFeature::Deletion),
        0 => Ok(TernaryFeature::Neutral),
        1 | 2 => Ok(TernaryFeature::Amplification),
        _ => Err(Error::CopyNumberOutOfRange(raw)),
    }
}

/// One-hot bits; exactly one is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureCode {
    pub x2: u8,
    pub x1: u8,
    pub x0: u8,
}

pub fn encode_feature(f: TernaryFeature) -> FeatureCode {
    match f {
        TernaryFeature::Deletion => FeatureCode { x2: 0, x1: 0, x0: 1 },
        TernaryFeature::Neutral => FeatureCode { x2: 0, x1: 1, x0: 0 },
        TernaryFeature::Amplification => FeatureCode { x2: 1, x1: 0, x0: 0 },
    }
}

/// `1` for threshold `-0.5`, `0` for `+0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitCode(u8);

impl SplitCode {
    pub fn new(bit: u8) -> Option<Self> {
        (bit <= 1).then_some(Self(bit))
    }

    pub fn bit(self) -> u8 {
        self.0
    }

    pub fn threshold(self) -> f64 {
        if self.0 == 1 {
            -0.5
        } else {
            0.5
        }
    }
}

pub fn encode_split(threshold: f64) -> Result<SplitCode> {
    if threshold == -0.5 {
        Ok(SplitCode(1))
    } else if threshold == 0.5 {
        Ok(SplitCode(0))
    } else {
        Err(Error::InadmissibleThreshold(threshold))
    }
}

/// `1` iff the encoded feature is below the split threshold.
pub fn compare_clear(fc: FeatureCode, y: SplitCode) -> u8 {
    let (x0, x2, y) = (fc.x0 as i64, fc.x2 as i64, y.0 as i64);
    ((1 - x0) * (x2 * (y - 1) - y) + 1) as u8
}

/// Plaintext split codes prepared for repeated comparisons.
pub struct PreparedSplits<B: Backend> {
    y: B::Plaintext,
    y_minus_one: B::Plaintext,
    one: B::Plaintext,
}

impl<B: Backend> PreparedSplits<B> {
    pub fn new(backend: &B, y: &PackedPlaintext) -> Result<Self> {
        let params = backend.params();
        let t = params.plaintext_modulus;
        let shifted: Vec<u64> = y.slots().iter().map(|&v| (v + t - 1) % t).collect();
        Ok(Self {
            y: backend.prepare(y)?,
            y_minus_one: backend.prepare(&PackedPlaintext::from_slots(shifted, params)?)?,
            one: backend.constant(1)?,
        })
    }
}

/// Slot-wise comparison against plaintext split codes; one ciphertext
/// product.
pub fn compare_encrypted<B: Backend>(
    backend: &B,
    x0: &B::Ciphertext,
    x2: &B::Ciphertext,
    y: &PackedPlaintext,
) -> Result<B::Ciphertext> {
    compare_prepared(backend, x0, x2, &PreparedSplits::new(backend, y)?)
}

pub fn compare_prepared<B: Backend>(
    backend: &B,
    x0: &B::Ciphertext,
    x2: &B::Ciphertext,
    y: &PreparedSplits<B>,
) -> Result<B::Ciphertext> {
    let inner = backend.sub_plain(&backend.mul_plain(x2, &y.y_minus_one)?, &y.y)?;
    finish(backend, x0, &inner, &y.one)
}

/// Slot-wise comparison against encrypted split codes; two ciphertext
/// products, `x2·(y-1)` first.
pub fn compare_encrypted_model<B: Backend>(
    backend: &B,
    x0: &B::Ciphertext,
    x2: &B::Ciphertext,
    y: &B::Ciphertext,
) -> Result<B::Ciphertext> {
    let one = backend.constant(1)?;
    let y_minus_one = backend.sub_plain(y, &one)?;
    let inner = backend.sub(&backend.mul(x2, &y_minus_one)?, y)?;
    finish(backend, x0, &inner, &one)
}

/// `(1 - x0)·inner + 1`
fn finish<B: Backend>(
    backend: &B,
    x0: &B::Ciphertext,
    inner: &B::Ciphertext,
    one: &B::Plaintext,
) -> Result<B::Ciphertext> {
    let not_x0 = backend.add_plain(&backend.negate(x0)?, one)?;
    Ok(backend.add_plain(&backend.mul(&not_x0, inner)?, one)?)
}
