//! Precomputed tables for one parameter set.

use num_bigint::BigUint;

use crate::arith::{ntt_primes, Modulus};
use crate::batch::SlotEncoder;
use crate::error::{HeError, Result};
use crate::params::{Fingerprint, HeParams};
use crate::rns::{BaseConverter, RnsBasis};

/// Everything derived from [`HeParams`] that the scheme needs at runtime.
///
/// Ciphertext products are computed exactly over an extended basis `Q·P`,
/// where the auxiliary primes `P` are derived deterministically from the
/// parameters and never serialized.
#[derive(Debug)]
pub struct HeContext {
    params: HeParams,
    fingerprint: Fingerprint,
    q: RnsBasis,
    p: RnsBasis,
    qp: RnsBasis,
    q_to_p: BaseConverter,
    p_to_q: BaseConverter,
    encoder: SlotEncoder,
    q_product: BigUint,
    /// floor(Q/t) mod q_i
    delta: Vec<u64>,
    /// (Q/q_i)^-1 mod q_i with Shoup companion.
    q_hat_inv: Vec<(u64, u64)>,
    /// (QP/m)^-1 mod m for every prime m of Q·P.
    qp_hat_inv: Vec<(u64, u64)>,
    /// floor(t·P/q_i) mod p_j, indexed [j][i].
    scale_int: Vec<Vec<u64>>,
    /// frac(t·P/q_i)
    scale_frac: Vec<f64>,
    /// t·(P/p_j) mod p_j
    scale_own: Vec<u64>,
}

fn mod_small(x: &BigUint, m: u64) -> u64 {
    (x % m).iter_u64_digits().next().unwrap_or(0)
}

impl HeContext {
    pub fn new(params: HeParams) -> Result<Self> {
        params.validate()?;
        let n = params.ring_degree;
        let t = params.plaintext_modulus;
        let q = RnsBasis::new(n, &params.coeff_modulus);

        // P must exceed t·N·Q so the scaled tensor still has a centered lift.
        let needed_bits =
            params.coeff_modulus_bits() + (64 - t.leading_zeros()) + n.trailing_zeros() + 4;
        let count = needed_bits.div_ceil(60) as usize;
        let mut exclude = params.coeff_modulus.clone();
        exclude.push(t);
        let p = RnsBasis::new(n, &ntt_primes(61, n, count, &exclude));
        let qp = q.join(&p);

        let q_product = q.product();
        let p_product = p.product();
        let qp_product = &q_product * &p_product;

        let delta_big = &q_product / t;
        let delta = q.moduli().iter().map(|m| mod_small(&delta_big, m.value())).collect();

        let hat_inv = |product: &BigUint, m: &Modulus| {
            let r = mod_small(&(product / m.value()), m.value());
            let inv = m
                .inv(r)
                .ok_or_else(|| HeError::InvalidParams("moduli are not coprime".into()))?;
            Ok::<_, HeError>((inv, m.shoup(inv)))
        };
        let q_hat_inv = q
            .moduli()
            .iter()
            .map(|m| hat_inv(&q_product, m))
            .collect::<Result<Vec<_>>>()?;
        let qp_hat_inv = qp
            .moduli()
            .iter()
            .map(|m| hat_inv(&qp_product, m))
            .collect::<Result<Vec<_>>>()?;

        let tp = &p_product * t;
        let scale_int = p
            .moduli()
            .iter()
            .map(|pj| {
                q.moduli()
                    .iter()
                    .map(|qi| mod_small(&(&tp / qi.value()), pj.value()))
                    .collect()
            })
            .collect();
        let scale_frac = q
            .moduli()
            .iter()
            .map(|qi| mod_small(&tp, qi.value()) as f64 / qi.value() as f64)
            .collect();
        let scale_own = p
            .moduli()
            .iter()
            .map(|pj| mod_small(&(&tp / pj.value()), pj.value()))
            .collect();

        Ok(Self {
            fingerprint: params.fingerprint(),
            encoder: SlotEncoder::new(&params),
            q_to_p: BaseConverter::new(&q, &p),
            p_to_q: BaseConverter::new(&p, &q),
            params,
            q,
            p,
            qp,
            q_product,
            delta,
            q_hat_inv,
            qp_hat_inv,
            scale_int,
            scale_frac,
            scale_own,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn degree(&self) -> usize {
        self.params.ring_degree
    }

    pub fn q_basis(&self) -> &RnsBasis {
        &self.q
    }

    pub fn extension_basis(&self) -> &RnsBasis {
        &self.p
    }

    pub(crate) fn encoder(&self) -> &SlotEncoder {
        &self.encoder
    }

    pub(crate) fn q_product(&self) -> &BigUint {
        &self.q_product
    }

    pub fn check_fingerprint(&self, fp: Fingerprint) -> Result<()> {
        if fp == self.fingerprint {
            Ok(())
        } else {
            Err(HeError::FingerprintMismatch)
        }
    }

    /// Plaintext polynomial lifted to `(-t/2, t/2]`, in NTT form over Q.
    pub(crate) fn plain_ntt(&self, slots: &[u64]) -> Vec<u64> {
        let t = self.encoder.plain_modulus();
        let coeffs: Vec<i64> = self
            .encoder
            .slots_to_coeffs(slots)
            .into_iter()
            .map(|c| t.center(c))
            .collect();
        let mut poly = self.q.from_signed(&coeffs);
        self.q.forward(&mut poly);
        poly
    }

    /// `floor(Q/t) · m` in coefficient form over Q.
    pub(crate) fn plain_scaled(&self, slots: &[u64]) -> Vec<u64> {
        let coeffs = self.encoder.slots_to_coeffs(slots);
        let n = self.degree();
        let mut out = self.q.zero();
        for (i, (qi, &d)) in self.q.moduli().iter().zip(&self.delta).enumerate() {
            let d_shoup = qi.shoup(d);
            for (o, &c) in out[i * n..(i + 1) * n].iter_mut().zip(&coeffs) {
                *o = qi.mul_shoup(qi.reduce(c), d, d_shoup);
            }
        }
        out
    }

    /// Coefficient-form Q polynomial, extended to Q·P and transformed to NTT form.
    pub(crate) fn extend_to_qp_ntt(&self, poly: &[u64]) -> Vec<u64> {
        let n = self.degree();
        let mut out = Vec::with_capacity(self.qp.len() * n);
        out.extend_from_slice(poly);
        out.extend(self.q_to_p.convert(poly, n));
        self.qp.forward(&mut out);
        out
    }

    pub(crate) fn qp_basis(&self) -> &RnsBasis {
        &self.qp
    }

    /// `round(t·x/Q)` for a coefficient-form polynomial over Q·P, returned over Q.
    pub(crate) fn scale_down(&self, x: &[u64]) -> Vec<u64> {
        let n = self.degree();
        let lq = self.q.len();
        let lp = self.p.len();
        let moduli = self.qp.moduli();
        let mut y = self.p.zero();
        let mut a = vec![0u64; lq + lp];
        for c in 0..n {
            for (k, m) in moduli.iter().enumerate() {
                let (w, ws) = self.qp_hat_inv[k];
                a[k] = m.mul_shoup(x[k * n + c], w, ws);
            }
            let frac: f64 = a[..lq]
                .iter()
                .zip(&self.scale_frac)
                .map(|(&ai, &f)| ai as f64 * f)
                .sum();
            let rounded = frac.round() as u128;
            for (j, pj) in self.p.moduli().iter().enumerate() {
                let mut acc = rounded;
                for (&ai, &s) in a[..lq].iter().zip(&self.scale_int[j]) {
                    acc += ai as u128 * s as u128;
                }
                acc += a[lq + j] as u128 * self.scale_own[j] as u128;
                y[j * n + c] = pj.reduce_wide(acc);
            }
        }
        self.p_to_q.convert(&y, n)
    }

    /// `round(t·x/Q) mod t` for a coefficient-form polynomial over Q.
    pub(crate) fn scale_to_plain(&self, x: &[u64]) -> Vec<u64> {
        let n = self.degree();
        let t = self.encoder.plain_modulus();
        let tv = t.value() as u128;
        (0..n)
            .map(|c| {
                let mut whole: u64 = 0;
                let mut frac = 0.0f64;
                for (i, qi) in self.q.moduli().iter().enumerate() {
                    let (w, ws) = self.q_hat_inv[i];
                    let a = qi.mul_shoup(x[i * n + c], w, ws) as u128;
                    let num = a * tv;
                    let qv = qi.value() as u128;
                    whole = t.add(whole, t.reduce_wide(num / qv));
                    frac += (num % qv) as f64 / qv as f64;
                }
                t.add(whole, t.reduce(frac.round() as u64))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_basis_is_large_enough() {
        for preset in crate::params::Preset::ALL {
            let ctx = HeContext::new(HeParams::preset(preset)).unwrap();
            let p_bits: u64 = ctx.extension_basis().product().bits();
            let needed = ctx.q_product().bits()
                + 64
                - ctx.params().plaintext_modulus.leading_zeros() as u64
                + ctx.degree().trailing_zeros() as u64;
            assert!(p_bits > needed, "{preset}: {p_bits} <= {needed}");
        }
    }
}
