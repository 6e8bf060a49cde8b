//! Scale-invariant RLWE encryption over an RNS coefficient modulus.
//!
//! Ciphertexts are kept in coefficient form. Products are computed exactly
//! over the extended basis `Q·P` and scaled back by `t/Q`; relinearization
//! and Galois key switching decompose by RNS digit.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};

use crate::backend::Backend;
use crate::batch::{rotation_galois_element, row_swap_galois_element, PackedPlaintext};
use crate::context::HeContext;
use crate::error::{HeError, Result};
use crate::keys::{sample_error, sample_ternary, EvalKeys, KeySwitchKey, PublicKey, SecretKey};
use crate::params::{Fingerprint, HeParams};
use crate::rns::reconstruct;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    /// Coefficient-form polynomials over Q, prime-major.
    pub(crate) parts: Vec<Vec<u64>>,
    pub(crate) level: usize,
    pub(crate) fingerprint: Fingerprint,
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }
}

/// A plaintext prepared for repeated use against ciphertexts.
#[derive(Clone, Debug)]
pub struct HePlaintext {
    packed: PackedPlaintext,
    /// Centered lift in NTT form, for products.
    ntt: Vec<u64>,
    /// floor(Q/t)·m in coefficient form, for sums.
    scaled: Vec<u64>,
}

impl HePlaintext {
    pub fn packed(&self) -> &PackedPlaintext {
        &self.packed
    }
}

impl HeContext {
    pub fn prepare_plaintext(&self, pt: &PackedPlaintext) -> Result<HePlaintext> {
        self.check_fingerprint(pt.fingerprint())?;
        Ok(HePlaintext {
            ntt: self.plain_ntt(pt.slots()),
            scaled: self.plain_scaled(pt.slots()),
            packed: pt.clone(),
        })
    }

    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        pk: &PublicKey,
        pt: &PackedPlaintext,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        self.check_fingerprint(pk.fingerprint)?;
        self.check_fingerprint(pt.fingerprint())?;
        let q = self.q_basis();
        let n = self.degree();
        let mut u = q.from_signed(&sample_ternary(rng, n));
        q.forward(&mut u);
        let mut c0 = q.mul_pointwise(&pk.parts[0], &u);
        let mut c1 = q.mul_pointwise(&pk.parts[1], &u);
        q.inverse(&mut c0);
        q.inverse(&mut c1);
        q.add_assign(&mut c0, &q.from_signed(&sample_error(rng, n)));
        q.add_assign(&mut c1, &q.from_signed(&sample_error(rng, n)));
        q.add_assign(&mut c0, &self.plain_scaled(pt.slots()));
        Ok(Ciphertext {
            parts: vec![c0, c1],
            level: self.params().depth_budget,
            fingerprint: self.fingerprint(),
        })
    }

    /// `c0 + c1·s (+ c2·s²)` in coefficient form.
    fn phase(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<u64>> {
        self.check_fingerprint(sk.fingerprint)?;
        self.check_fingerprint(ct.fingerprint)?;
        let q = self.q_basis();
        let mut acc = q.zero();
        let mut s_power = sk.poly.clone();
        for part in &ct.parts[1..] {
            let mut p = part.clone();
            q.forward(&mut p);
            q.mul_acc(&mut acc, &p, &s_power);
            s_power = q.mul_pointwise(&s_power, &sk.poly);
        }
        q.inverse(&mut acc);
        q.add_assign(&mut acc, &ct.parts[0]);
        Ok(acc)
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<PackedPlaintext> {
        let phase = self.phase(sk, ct)?;
        let coeffs = self.scale_to_plain(&phase);
        Ok(PackedPlaintext::from_parts(
            self.encoder().coeffs_to_slots(&coeffs),
            self.fingerprint(),
        ))
    }

    /// Remaining noise margin in bits; 0 means decryption is no longer
    /// guaranteed to be correct. Requires the secret key.
    pub fn noise_budget(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<u32> {
        let phase = self.phase(sk, ct)?;
        let q = self.q_product();
        let half = q >> 1u32;
        let t = BigUint::from(self.params().plaintext_modulus);
        let mut worst = BigUint::default();
        for v in reconstruct(self.q_basis(), &phase) {
            let r = (v * &t) % q;
            let magnitude = if r > half { q - &r } else { r };
            if magnitude > worst {
                worst = magnitude;
            }
        }
        let budget = q.bits() as i64 - worst.bits() as i64 - 1;
        Ok(budget.max(0) as u32)
    }

    fn check_ct(&self, ct: &Ciphertext) -> Result<()> {
        self.check_fingerprint(ct.fingerprint)
    }

    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        self.check_ct(a)?;
        self.check_ct(b)
    }

    fn combine(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        op: impl Fn(&mut [u64], &[u64]),
    ) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        let mut parts = a.parts.clone();
        parts.resize(a.parts.len().max(b.parts.len()), self.q_basis().zero());
        for (x, y) in parts.iter_mut().zip(&b.parts) {
            op(x, y);
        }
        Ok(Ciphertext {
            parts,
            level: a.level.min(b.level),
            fingerprint: self.fingerprint(),
        })
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let q = self.q_basis();
        self.combine(a, b, |x, y| q.add_assign(x, y))
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let q = self.q_basis();
        self.combine(a, b, |x, y| q.sub_assign(x, y))
    }

    pub fn negate(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        let mut out = a.clone();
        for part in &mut out.parts {
            self.q_basis().negate(part);
        }
        Ok(out)
    }

    fn check_plain(&self, p: &HePlaintext) -> Result<()> {
        self.check_fingerprint(p.packed.fingerprint())
    }

    pub fn add_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_plain(p)?;
        let mut out = a.clone();
        self.q_basis().add_assign(&mut out.parts[0], &p.scaled);
        Ok(out)
    }

    pub fn sub_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_plain(p)?;
        let mut out = a.clone();
        self.q_basis().sub_assign(&mut out.parts[0], &p.scaled);
        Ok(out)
    }

    pub fn mul_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.check_ct(a)?;
        self.check_plain(p)?;
        let q = self.q_basis();
        let parts = a
            .parts
            .iter()
            .map(|part| {
                let mut x = part.clone();
                q.forward(&mut x);
                let mut y = q.mul_pointwise(&x, &p.ntt);
                q.inverse(&mut y);
                y
            })
            .collect();
        Ok(Ciphertext {
            parts,
            level: a.level,
            fingerprint: a.fingerprint,
        })
    }

    /// Tensor product scaled by `t/Q`; three parts, not yet relinearized.
    pub fn mul_no_relin(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        if a.parts.len() != 2 {
            return Err(HeError::UnexpectedParts(a.parts.len()));
        }
        if b.parts.len() != 2 {
            return Err(HeError::UnexpectedParts(b.parts.len()));
        }
        if a.level == 0 || b.level == 0 {
            return Err(HeError::DepthExhausted);
        }
        let qp = self.qp_basis();
        let [a0, a1] = [&a.parts[0], &a.parts[1]].map(|p| self.extend_to_qp_ntt(p));
        let [b0, b1] = [&b.parts[0], &b.parts[1]].map(|p| self.extend_to_qp_ntt(p));
        let mut d0 = qp.mul_pointwise(&a0, &b0);
        let mut d1 = qp.mul_pointwise(&a0, &b1);
        qp.mul_acc(&mut d1, &a1, &b0);
        let mut d2 = qp.mul_pointwise(&a1, &b1);
        let parts = [&mut d0, &mut d1, &mut d2]
            .into_iter()
            .map(|d| {
                qp.inverse(d);
                self.scale_down(d)
            })
            .collect();
        Ok(Ciphertext {
            parts,
            level: a.level.min(b.level) - 1,
            fingerprint: self.fingerprint(),
        })
    }

    /// Applies a switching key to one coefficient-form component, returning
    /// the two-part correction in coefficient form.
    fn key_switch(&self, component: &[u64], key: &KeySwitchKey) -> [Vec<u64>; 2] {
        let q = self.q_basis();
        let n = self.degree();
        let mut acc0 = q.zero();
        let mut acc1 = q.zero();
        for (i, (digit_key, qi)) in key.digits.iter().zip(q.moduli()).enumerate() {
            let digit: Vec<i64> = component[i * n..(i + 1) * n]
                .iter()
                .map(|&c| qi.center(c))
                .collect();
            let mut lifted = q.from_signed(&digit);
            q.forward(&mut lifted);
            q.mul_acc(&mut acc0, &lifted, &digit_key[0]);
            q.mul_acc(&mut acc1, &lifted, &digit_key[1]);
        }
        q.inverse(&mut acc0);
        q.inverse(&mut acc1);
        [acc0, acc1]
    }

    pub fn relinearize(&self, ct: &Ciphertext, ek: &EvalKeys) -> Result<Ciphertext> {
        self.check_ct(ct)?;
        self.check_fingerprint(ek.fingerprint)?;
        match ct.parts.len() {
            2 => Ok(ct.clone()),
            3 => {
                let [k0, k1] = self.key_switch(&ct.parts[2], &ek.relin);
                let q = self.q_basis();
                let mut c0 = ct.parts[0].clone();
                let mut c1 = ct.parts[1].clone();
                q.add_assign(&mut c0, &k0);
                q.add_assign(&mut c1, &k1);
                Ok(Ciphertext {
                    parts: vec![c0, c1],
                    level: ct.level,
                    fingerprint: ct.fingerprint,
                })
            }
            other => Err(HeError::UnexpectedParts(other)),
        }
    }

    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, ek: &EvalKeys) -> Result<Ciphertext> {
        self.check_fingerprint(ek.fingerprint)?;
        let product = self.mul_no_relin(a, b)?;
        self.relinearize(&product, ek)
    }

    fn apply_galois(&self, ct: &Ciphertext, element: usize, key: &KeySwitchKey) -> Result<Ciphertext> {
        if ct.parts.len() != 2 {
            return Err(HeError::UnexpectedParts(ct.parts.len()));
        }
        let q = self.q_basis();
        let mut c0 = q.automorphism(&ct.parts[0], element);
        let c1 = q.automorphism(&ct.parts[1], element);
        let [k0, k1] = self.key_switch(&c1, key);
        q.add_assign(&mut c0, &k0);
        Ok(Ciphertext {
            parts: vec![c0, k1],
            level: ct.level,
            fingerprint: ct.fingerprint,
        })
    }

    /// Rotates both slot rows left by `steps` (right for negative steps).
    ///
    /// Uses the exact Galois key when present, otherwise composes the
    /// power-of-two keys matching the binary expansion of the step count.
    pub fn rotate(&self, ct: &Ciphertext, steps: i64, ek: &EvalKeys) -> Result<Ciphertext> {
        self.check_ct(ct)?;
        self.check_fingerprint(ek.fingerprint)?;
        let n = self.degree();
        let plan = rotation_plan(steps, n, |e| ek.has_galois(e))?;
        let mut out = ct.clone();
        for element in plan {
            out = self.apply_galois(&out, element, &ek.galois[&element])?;
        }
        Ok(out)
    }

    pub fn swap_rows(&self, ct: &Ciphertext, ek: &EvalKeys) -> Result<Ciphertext> {
        self.check_ct(ct)?;
        self.check_fingerprint(ek.fingerprint)?;
        let element = row_swap_galois_element(self.degree());
        let key = ek
            .galois
            .get(&element)
            .ok_or(HeError::MissingGaloisKey(self.params().row_size() as i64))?;
        self.apply_galois(ct, element, key)
    }
}

/// Galois elements to apply, in order, for a row rotation by `steps`.
pub(crate) fn rotation_plan(
    steps: i64,
    ring_degree: usize,
    available: impl Fn(usize) -> bool,
) -> Result<Vec<usize>> {
    let row = (ring_degree / 2) as i64;
    let r = steps.rem_euclid(row) as usize;
    if r == 0 {
        return Ok(Vec::new());
    }
    let direct = rotation_galois_element(r, ring_degree);
    if available(direct) {
        return Ok(vec![direct]);
    }
    let mut plan = Vec::new();
    let mut bit = 1usize;
    while bit <= r {
        if r & bit != 0 {
            let element = rotation_galois_element(bit, ring_degree);
            if !available(element) {
                return Err(HeError::MissingGaloisKey(steps));
            }
            plan.push(element);
        }
        bit <<= 1;
    }
    Ok(plan)
}

/// Server-side evaluator: public key plus evaluation keys, no secret key.
#[derive(Clone, Debug)]
pub struct HeBackend {
    ctx: Arc<HeContext>,
    public: Arc<PublicKey>,
    eval: Arc<EvalKeys>,
}

impl HeBackend {
    pub fn new(ctx: Arc<HeContext>, public: PublicKey, eval: EvalKeys) -> Result<Self> {
        ctx.check_fingerprint(public.fingerprint)?;
        ctx.check_fingerprint(eval.fingerprint)?;
        Ok(Self {
            ctx,
            public: Arc::new(public),
            eval: Arc::new(eval),
        })
    }

    pub fn context(&self) -> &Arc<HeContext> {
        &self.ctx
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn eval_keys(&self) -> &EvalKeys {
        &self.eval
    }
}

impl Backend for HeBackend {
    type Ciphertext = Ciphertext;
    type Plaintext = HePlaintext;

    fn params(&self) -> &HeParams {
        self.ctx.params()
    }

    fn prepare(&self, pt: &PackedPlaintext) -> Result<HePlaintext> {
        self.ctx.prepare_plaintext(pt)
    }

    fn encrypt<R: RngCore + CryptoRng>(&self, pt: &PackedPlaintext, rng: &mut R) -> Result<Ciphertext> {
        self.ctx.encrypt(&self.public, pt, rng)
    }

    fn level(&self, ct: &Ciphertext) -> usize {
        ct.level
    }

    fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.ctx.add(a, b)
    }

    fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.ctx.sub(a, b)
    }

    fn negate(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.ctx.negate(a)
    }

    fn add_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.ctx.add_plain(a, p)
    }

    fn sub_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.ctx.sub_plain(a, p)
    }

    fn mul_plain(&self, a: &Ciphertext, p: &HePlaintext) -> Result<Ciphertext> {
        self.ctx.mul_plain(a, p)
    }

    fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.ctx.mul(a, b, &self.eval)
    }

    fn rotate(&self, a: &Ciphertext, steps: i64) -> Result<Ciphertext> {
        self.ctx.rotate(a, steps, &self.eval)
    }

    fn swap_rows(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.ctx.swap_rows(a, &self.eval)
    }
}
