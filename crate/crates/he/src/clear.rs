//! Cleartext mirror of the encrypted backend.
//!
//! Same operation contract, same errors (fingerprints, depth, missing Galois
//! keys), but values are plain slot vectors modulo `t`. Used as the oracle for
//! the encrypted path.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};

use crate::arith::Modulus;
use crate::backend::Backend;
use crate::batch::{rotation_galois_element, row_swap_galois_element, PackedPlaintext};
use crate::bfv::rotation_plan;
use crate::error::{HeError, Result};
use crate::params::{Fingerprint, HeParams};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearCiphertext {
    slots: Vec<u64>,
    level: usize,
    fingerprint: Fingerprint,
}

impl ClearCiphertext {
    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

#[derive(Clone, Debug)]
pub struct ClearBackend {
    params: HeParams,
    fingerprint: Fingerprint,
    t: Modulus,
    galois: BTreeSet<usize>,
}

impl ClearBackend {
    /// Mirrors a key set generated for `params`: the same rotations are
    /// available as the Galois keys `keygen` would produce.
    pub fn new(params: HeParams) -> Result<Self> {
        params.validate()?;
        let n = params.ring_degree;
        let mut galois: BTreeSet<usize> = params
            .required_rotation_steps()
            .into_iter()
            .map(|s| rotation_galois_element(s, n))
            .collect();
        if params.requires_row_swap() {
            galois.insert(row_swap_galois_element(n));
        }
        Ok(Self {
            fingerprint: params.fingerprint(),
            t: Modulus::new(params.plaintext_modulus),
            params,
            galois,
        })
    }

    /// The slot contents, as decryption would return them.
    pub fn reveal(&self, ct: &ClearCiphertext) -> Result<PackedPlaintext> {
        self.check(ct.fingerprint)?;
        PackedPlaintext::from_slots(ct.slots.clone(), &self.params)
    }

    fn check(&self, fp: Fingerprint) -> Result<()> {
        if fp == self.fingerprint {
            Ok(())
        } else {
            Err(HeError::FingerprintMismatch)
        }
    }

    fn zip(
        &self,
        a: &ClearCiphertext,
        b: &[u64],
        level: usize,
        op: impl Fn(u64, u64) -> u64,
    ) -> ClearCiphertext {
        ClearCiphertext {
            slots: a.slots.iter().zip(b).map(|(&x, &y)| op(x, y)).collect(),
            level,
            fingerprint: self.fingerprint,
        }
    }

    fn binary(
        &self,
        a: &ClearCiphertext,
        b: &ClearCiphertext,
        op: impl Fn(u64, u64) -> u64,
    ) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        self.check(b.fingerprint)?;
        Ok(self.zip(a, &b.slots, a.level.min(b.level), op))
    }

    fn with_plain(
        &self,
        a: &ClearCiphertext,
        p: &PackedPlaintext,
        op: impl Fn(u64, u64) -> u64,
    ) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        self.check(p.fingerprint())?;
        Ok(self.zip(a, p.slots(), a.level, op))
    }

    fn permute(&self, a: &ClearCiphertext, source: impl Fn(usize) -> usize) -> ClearCiphertext {
        ClearCiphertext {
            slots: (0..a.slots.len()).map(|i| a.slots[source(i)]).collect(),
            level: a.level,
            fingerprint: a.fingerprint,
        }
    }
}

impl Backend for ClearBackend {
    type Ciphertext = ClearCiphertext;
    type Plaintext = PackedPlaintext;

    fn params(&self) -> &HeParams {
        &self.params
    }

    fn prepare(&self, pt: &PackedPlaintext) -> Result<PackedPlaintext> {
        self.check(pt.fingerprint())?;
        Ok(pt.clone())
    }

    fn encrypt<R: RngCore + CryptoRng>(&self, pt: &PackedPlaintext, _rng: &mut R) -> Result<ClearCiphertext> {
        self.check(pt.fingerprint())?;
        Ok(ClearCiphertext {
            slots: pt.slots().to_vec(),
            level: self.params.depth_budget,
            fingerprint: self.fingerprint,
        })
    }

    fn level(&self, ct: &ClearCiphertext) -> usize {
        ct.level
    }

    fn add(&self, a: &ClearCiphertext, b: &ClearCiphertext) -> Result<ClearCiphertext> {
        self.binary(a, b, |x, y| self.t.add(x, y))
    }

    fn sub(&self, a: &ClearCiphertext, b: &ClearCiphertext) -> Result<ClearCiphertext> {
        self.binary(a, b, |x, y| self.t.sub(x, y))
    }

    fn negate(&self, a: &ClearCiphertext) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        Ok(ClearCiphertext {
            slots: a.slots.iter().map(|&x| self.t.neg(x)).collect(),
            ..a.clone()
        })
    }

    fn add_plain(&self, a: &ClearCiphertext, p: &PackedPlaintext) -> Result<ClearCiphertext> {
        self.with_plain(a, p, |x, y| self.t.add(x, y))
    }

    fn sub_plain(&self, a: &ClearCiphertext, p: &PackedPlaintext) -> Result<ClearCiphertext> {
        self.with_plain(a, p, |x, y| self.t.sub(x, y))
    }

    fn mul_plain(&self, a: &ClearCiphertext, p: &PackedPlaintext) -> Result<ClearCiphertext> {
        self.with_plain(a, p, |x, y| self.t.mul(x, y))
    }

    fn mul(&self, a: &ClearCiphertext, b: &ClearCiphertext) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        self.check(b.fingerprint)?;
        if a.level == 0 || b.level == 0 {
            return Err(HeError::DepthExhausted);
        }
        Ok(self.zip(a, &b.slots, a.level.min(b.level) - 1, |x, y| self.t.mul(x, y)))
    }

    fn rotate(&self, a: &ClearCiphertext, steps: i64) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        let n = self.params.ring_degree;
        rotation_plan(steps, n, |e| self.galois.contains(&e))?;
        let row = n / 2;
        let shift = steps.rem_euclid(row as i64) as usize;
        Ok(self.permute(a, |i| (i / row) * row + (i % row + shift) % row))
    }

    fn swap_rows(&self, a: &ClearCiphertext) -> Result<ClearCiphertext> {
        self.check(a.fingerprint)?;
        let n = self.params.ring_degree;
        if !self.galois.contains(&row_swap_galois_element(n)) {
            return Err(HeError::MissingGaloisKey(self.params.row_size() as i64));
        }
        let row = n / 2;
        Ok(self.permute(a, |i| (i + row) % n))
    }
}
