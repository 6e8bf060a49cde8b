//! Operation-counting wrapper for cost accounting.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{CryptoRng, RngCore};

use crate::backend::Backend;
use crate::batch::PackedPlaintext;
use crate::error::Result;
use crate::params::HeParams;

/// Homomorphic operation tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub encrypt: u64,
    pub add: u64,
    pub sub: u64,
    pub negate: u64,
    pub add_plain: u64,
    pub sub_plain: u64,
    pub mul_plain: u64,
    pub mul: u64,
    pub rotate: u64,
    pub swap_rows: u64,
}

#[derive(Default, Debug)]
struct Counters {
    encrypt: AtomicU64,
    add: AtomicU64,
    sub: AtomicU64,
    negate: AtomicU64,
    add_plain: AtomicU64,
    sub_plain: AtomicU64,
    mul_plain: AtomicU64,
    mul: AtomicU64,
    rotate: AtomicU64,
    swap_rows: AtomicU64,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

/// Forwards every operation to `B` and counts it. `sum_slots` is not
/// forwarded, so its rotations and additions are counted individually.
#[derive(Debug)]
pub struct CountingBackend<B> {
    inner: B,
    counters: Counters,
}

impl<B: Backend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            counters: Counters::default(),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn counts(&self) -> OpCounts {
        let c = &self.counters;
        let load = |a: &AtomicU64| a.load(Ordering::Relaxed);
        OpCounts {
            encrypt: load(&c.encrypt),
            add: load(&c.add),
            sub: load(&c.sub),
            negate: load(&c.negate),
            add_plain: load(&c.add_plain),
            sub_plain: load(&c.sub_plain),
            mul_plain: load(&c.mul_plain),
            mul: load(&c.mul),
            rotate: load(&c.rotate),
            swap_rows: load(&c.swap_rows),
        }
    }

    pub fn reset(&self) {
        let c = &self.counters;
        for a in [
            &c.encrypt,
            &c.add,
            &c.sub,
            &c.negate,
            &c.add_plain,
            &c.sub_plain,
            &c.mul_plain,
            &c.mul,
            &c.rotate,
            &c.swap_rows,
        ] {
            a.store(0, Ordering::Relaxed);
        }
    }
}

impl<B: Backend> Backend for CountingBackend<B> {
    type Ciphertext = B::Ciphertext;
    type Plaintext = B::Plaintext;

    fn params(&self) -> &HeParams {
        self.inner.params()
    }

    fn prepare(&self, pt: &PackedPlaintext) -> Result<Self::Plaintext> {
        self.inner.prepare(pt)
    }

    fn encrypt<R: RngCore + CryptoRng>(&self, pt: &PackedPlaintext, rng: &mut R) -> Result<Self::Ciphertext> {
        bump(&self.counters.encrypt);
        self.inner.encrypt(pt, rng)
    }

    fn level(&self, ct: &Self::Ciphertext) -> usize {
        self.inner.level(ct)
    }

    fn add(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext> {
        bump(&self.counters.add);
        self.inner.add(a, b)
    }

    fn sub(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext> {
        bump(&self.counters.sub);
        self.inner.sub(a, b)
    }

    fn negate(&self, a: &Self::Ciphertext) -> Result<Self::Ciphertext> {
        bump(&self.counters.negate);
        self.inner.negate(a)
    }

    fn add_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext> {
        bump(&self.counters.add_plain);
        self.inner.add_plain(a, p)
    }

    fn sub_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext> {
        bump(&self.counters.sub_plain);
        self.inner.sub_plain(a, p)
    }

    fn mul_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext> {
        bump(&self.counters.mul_plain);
        self.inner.mul_plain(a, p)
    }

    fn mul(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext> {
        bump(&self.counters.mul);
        self.inner.mul(a, b)
    }

    fn rotate(&self, a: &Self::Ciphertext, steps: i64) -> Result<Self::Ciphertext> {
        bump(&self.counters.rotate);
        self.inner.rotate(a, steps)
    }

    fn swap_rows(&self, a: &Self::Ciphertext) -> Result<Self::Ciphertext> {
        bump(&self.counters.swap_rows);
        self.inner.swap_rows(a)
    }
}
