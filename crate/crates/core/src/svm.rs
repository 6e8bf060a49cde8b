//! One-vs-all linear SVM over a packed encrypted feature vector.
//!
//! Features are packed unscaled (`-1, 0, 1`) in slots `0..d`; weights and
//! bias are fixed-point at scale `2^scale_bits`, so a confidence decodes by a
//! single division by the scale.

use hedgerow_he::{Backend, HeContext, PackedPlaintext, SecretKey};

use crate::encoding::TernaryFeature;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SvmModel {
    pub num_classes: usize,
    pub num_features: usize,
    pub scale_bits: u32,
    /// `s × d` fixed-point weights.
    pub weights: Vec<Vec<i64>>,
    pub bias: Vec<i64>,
}

fn quantize(x: f64, scale_bits: u32) -> Result<i64> {
    let v = (x * (1u64 << scale_bits) as f64).round();
    if !v.is_finite() || v.abs() >= 2f64.powi(62) {
        return Err(Error::Model(format!("value {x} not representable at scale 2^{scale_bits}")));
    }
    Ok(v as i64)
}

/// Rounds real weights and bias to fixed point.
pub fn quantize_model(weights: &[Vec<f64>], bias: &[f64], scale_bits: u32) -> Result<SvmModel> {
    if scale_bits > 40 {
        return Err(Error::Model(format!("scale 2^{scale_bits} too large")));
    }
    if weights.is_empty() || weights.len() != bias.len() {
        return Err(Error::Model(format!(
            "{} weight rows for {} biases",
            weights.len(),
            bias.len()
        )));
    }
    let d = weights[0].len();
    if d == 0 || weights.iter().any(|row| row.len() != d) {
        return Err(Error::Model("weight rows must share a nonzero length".into()));
    }
    let weights = weights
        .iter()
        .map(|row| row.iter().map(|&w| quantize(w, scale_bits)).collect())
        .collect::<Result<_>>()?;
    let bias: Vec<i64> = bias.iter().map(|&b| quantize(b, scale_bits)).collect::<Result<_>>()?;
    Ok(SvmModel {
        num_classes: bias.len(),
        num_features: d,
        scale_bits,
        weights,
        bias,
    })
}

/// Minimal bit width of a modulus whose half-range exceeds `bound`.
pub(crate) fn required_bits(bound: u128) -> u32 {
    128 - (2 * bound + 1).leading_zeros()
}

pub(crate) fn check_bound(bound: u128, plaintext_modulus: u64) -> Result<()> {
    if 2 * bound < plaintext_modulus as u128 {
        Ok(())
    } else {
        Err(Error::Overflow {
            bound,
            required_bits: required_bits(bound),
        })
    }
}

impl SvmModel {
    /// Feature count rounded up to a power of two: the slot-sum width.
    pub fn d_padded(&self) -> usize {
        self.num_features.next_power_of_two()
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.scale_bits) as f64
    }

    /// Worst-case absolute confidence over ternary inputs.
    pub fn aggregate_bound(&self) -> u128 {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                row.iter().map(|w| w.unsigned_abs() as u128).sum::<u128>() + b.unsigned_abs() as u128
            })
            .max()
            .unwrap_or(0)
    }

    pub fn check_plaintext_modulus(&self, t: u64) -> Result<()> {
        check_bound(self.aggregate_bound(), t)
    }

    /// Fixed-point confidences `W·x + b`.
    pub fn confidences_clear(&self, sample: &[TernaryFeature]) -> Result<Vec<i64>> {
        if sample.len() < self.num_features {
            return Err(Error::FeatureOutOfRange {
                index: self.num_features - 1,
                features: sample.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(sample).map(|(w, x)| w * x.value()).sum::<i64>() + b)
            .collect())
    }

    pub fn descale(&self, fixed: &[i64]) -> Vec<f64> {
        fixed.iter().map(|&v| v as f64 / self.scale()).collect()
    }
}

/// Slot vector holding the sample's features in slots `0..d`.
pub fn pack_features(sample: &[TernaryFeature], d: usize) -> Result<Vec<i64>> {
    if sample.len() < d {
        return Err(Error::FeatureOutOfRange {
            index: d - 1,
            features: sample.len(),
        });
    }
    Ok(sample[..d].iter().map(|f| f.value()).collect())
}

/// Weight and bias plaintexts prepared once per model.
pub struct PreparedSvm<B: Backend> {
    weights: Vec<B::Plaintext>,
    bias: Vec<B::Plaintext>,
    width: usize,
}

impl<B: Backend> PreparedSvm<B> {
    pub fn new(backend: &B, model: &SvmModel) -> Result<Self> {
        let params = backend.params();
        let width = model.d_padded();
        if width > params.row_size() {
            return Err(Error::Shape(format!(
                "{} features exceed the {} slots of one rotation row",
                model.num_features,
                params.row_size()
            )));
        }
        model.check_plaintext_modulus(params.plaintext_modulus)?;
        let weights = model
            .weights
            .iter()
            .map(|row| Ok(backend.prepare(&PackedPlaintext::encode(row, params)?)?))
            .collect::<Result<_>>()?;
        let bias = model
            .bias
            .iter()
            .map(|&b| Ok(backend.constant(b)?))
            .collect::<Result<_>>()?;
        Ok(Self { weights, bias, width })
    }
}

/// One ciphertext per class; slot 0 holds the fixed-point confidence.
pub fn infer_encrypted<B: Backend>(
    backend: &B,
    x: &B::Ciphertext,
    model: &SvmModel,
) -> Result<Vec<B::Ciphertext>> {
    infer_prepared(backend, x, &PreparedSvm::new(backend, model)?)
}

pub fn infer_prepared<B: Backend>(
    backend: &B,
    x: &B::Ciphertext,
    model: &PreparedSvm<B>,
) -> Result<Vec<B::Ciphertext>> {
    model
        .weights
        .iter()
        .zip(&model.bias)
        .map(|(w, b)| {
            let products = backend.mul_plain(x, w)?;
            let dot = backend.sum_slots(&products, model.width)?;
            Ok(backend.add_plain(&dot, b)?)
        })
        .collect()
}

/// Decrypts slot 0 of each class ciphertext and removes the scale.
pub fn decode_confidences(
    ctx: &HeContext,
    sk: &SecretKey,
    cts: &[hedgerow_he::Ciphertext],
    model: &SvmModel,
) -> Result<Vec<f64>> {
    let fixed = cts
        .iter()
        .map(|ct| Ok(ctx.decrypt(sk, ct)?.decode_signed(ctx.params())[0]))
        .collect::<Result<Vec<i64>>>()?;
    Ok(model.descale(&fixed))
}
