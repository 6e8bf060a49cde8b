use std::collections::BTreeMap;

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::batch::{rotation_galois_element, row_swap_galois_element};
use crate::context::HeContext;
use crate::params::Fingerprint;
use crate::rns::RnsBasis;

/// Coin pairs in the centered binomial error distribution (σ ≈ 3.24).
const ERROR_ETA: u32 = 21;

pub(crate) fn sample_ternary<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1i64..=1)).collect()
}

pub(crate) fn sample_error<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    let mask = (1u64 << ERROR_ETA) - 1;
    (0..n)
        .map(|_| {
            let bits = rng.next_u64();
            (bits & mask).count_ones() as i64 - ((bits >> 32) & mask).count_ones() as i64
        })
        .collect()
}

/// Uniform polynomial, sampled residue by residue (already in NTT form).
pub(crate) fn sample_uniform<R: RngCore>(rng: &mut R, basis: &RnsBasis) -> Vec<u64> {
    let n = basis.degree();
    let mut out = Vec::with_capacity(basis.len() * n);
    for q in basis.moduli() {
        out.extend((0..n).map(|_| rng.gen_range(0..q.value())));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) fingerprint: Fingerprint,
    /// Ternary secret in NTT form over Q.
    pub(crate) poly: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) fingerprint: Fingerprint,
    /// (-a·s + e, a) in NTT form over Q.
    pub(crate) parts: [Vec<u64>; 2],
}

/// Key switching key with one RNS digit per coefficient prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySwitchKey {
    /// (b_i, a_i) pairs in NTT form over Q.
    pub(crate) digits: Vec<[Vec<u64>; 2]>,
}

/// Relinearization key plus Galois keys, indexed by Galois element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalKeys {
    pub(crate) fingerprint: Fingerprint,
    pub(crate) relin: KeySwitchKey,
    pub(crate) galois: BTreeMap<usize, KeySwitchKey>,
}

impl SecretKey {
    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }
}

impl PublicKey {
    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }
}

impl EvalKeys {
    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    /// Galois elements with a key, ascending.
    pub fn galois_elements(&self) -> Vec<usize> {
        self.galois.keys().copied().collect()
    }

    pub fn has_galois(&self, element: usize) -> bool {
        self.galois.contains_key(&element)
    }
}

/// Deterministic key generation from a 256-bit seed.
///
/// Galois keys cover exactly the rotations needed by the parameters'
/// declared sum widths (plus the row swap when a width spans all slots).
pub fn keygen(ctx: &HeContext, seed: [u8; 32]) -> (SecretKey, PublicKey, EvalKeys) {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let q = ctx.q_basis();
    let n = ctx.degree();
    let fingerprint = ctx.fingerprint();

    let mut s = q.from_signed(&sample_ternary(&mut rng, n));
    q.forward(&mut s);
    let secret = SecretKey {
        fingerprint,
        poly: s,
    };

    let a = sample_uniform(&mut rng, q);
    let mut e = q.from_signed(&sample_error(&mut rng, n));
    q.forward(&mut e);
    let mut b = q.mul_pointwise(&a, &secret.poly);
    q.negate(&mut b);
    q.add_assign(&mut b, &e);
    let public = PublicKey {
        fingerprint,
        parts: [b, a],
    };

    let s_squared = q.mul_pointwise(&secret.poly, &secret.poly);
    let relin = switching_key(ctx, &secret, &s_squared, &mut rng);

    let mut elements: Vec<usize> = ctx
        .params()
        .required_rotation_steps()
        .into_iter()
        .map(|step| rotation_galois_element(step, n))
        .collect();
    if ctx.params().requires_row_swap() {
        elements.push(row_swap_galois_element(n));
    }
    let mut galois = BTreeMap::new();
    for element in elements {
        let mut s_coeff = secret.poly.clone();
        q.inverse(&mut s_coeff);
        let mut target = q.automorphism(&s_coeff, element);
        q.forward(&mut target);
        galois.insert(element, switching_key(ctx, &secret, &target, &mut rng));
    }

    let eval = EvalKeys {
        fingerprint,
        relin,
        galois,
    };
    (secret, public, eval)
}

/// Key that re-encrypts `target`-encrypted components under `secret`.
fn switching_key<R: RngCore + CryptoRng>(
    ctx: &HeContext,
    secret: &SecretKey,
    target: &[u64],
    rng: &mut R,
) -> KeySwitchKey {
    let q = ctx.q_basis();
    let n = ctx.degree();
    let digits = (0..q.len())
        .map(|i| {
            let a = sample_uniform(rng, q);
            let mut e = q.from_signed(&sample_error(rng, n));
            q.forward(&mut e);
            let mut b = q.mul_pointwise(&a, &secret.poly);
            q.negate(&mut b);
            q.add_assign(&mut b, &e);
            // The CRT basis element for prime i is 1 mod q_i and 0 elsewhere.
            let qi = q.moduli()[i];
            for (x, &y) in b[i * n..(i + 1) * n].iter_mut().zip(&target[i * n..(i + 1) * n]) {
                *x = qi.add(*x, y);
            }
            [b, a]
        })
        .collect();
    KeySwitchKey { digits }
}
