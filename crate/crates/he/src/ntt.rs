//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is Cooley-Tukey with Harvey's lazy butterflies and
//! produces evaluations in bit-reversed order: output slot `k` holds
//! `f(psi^(2*bitrev(k) + 1))`. The inverse is Gentleman-Sande and accepts
//! that same order.

use crate::arith::{minimal_primitive_root, Modulus};

#[derive(Clone, Debug)]
pub struct NttTable {
    modulus: Modulus,
    degree: usize,
    log_degree: u32,
    psi: u64,
    /// psi^bitrev(i) and its Shoup companion.
    roots: Vec<(u64, u64)>,
    /// psi^-bitrev(i) and its Shoup companion.
    inv_roots: Vec<(u64, u64)>,
    degree_inv: (u64, u64),
}

pub fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    pub fn new(modulus: Modulus, degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 2);
        let log_degree = degree.trailing_zeros();
        let psi = minimal_primitive_root(&modulus, 2 * degree as u64);
        let psi_inv = modulus.inv(psi).expect("root is invertible");
        let powers = |base: u64| {
            let mut pow = vec![0u64; degree];
            let mut acc = 1u64;
            for i in 0..degree {
                pow[i] = acc;
                acc = modulus.mul(acc, base);
            }
            (0..degree)
                .map(|i| {
                    let w = pow[bit_reverse(i, log_degree)];
                    (w, modulus.shoup(w))
                })
                .collect::<Vec<_>>()
        };
        let n_inv = modulus.inv(degree as u64).expect("degree invertible");
        Self {
            modulus,
            degree,
            log_degree,
            psi,
            roots: powers(psi),
            inv_roots: powers(psi_inv),
            degree_inv: (n_inv, modulus.shoup(n_inv)),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn log_degree(&self) -> u32 {
        self.log_degree
    }

    /// The primitive `2N`-th root of unity the transform is built on.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let (w, w_shoup) = self.roots[m + i];
                let start = 2 * i * t;
                let (lo, hi) = a[start..start + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = self.modulus.mul_shoup_lazy(*y, w, w_shoup);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            if *x >= two_q {
                *x -= two_q;
            }
            if *x >= q {
                *x -= q;
            }
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let (w, w_shoup) = self.inv_roots[h + i];
                let start = 2 * i * t;
                let (lo, hi) = a[start..start + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = self.modulus.mul_shoup_lazy(u + two_q - v, w, w_shoup);
                }
            }
            t <<= 1;
            m = h;
        }
        let (n_inv, n_inv_shoup) = self.degree_inv;
        for x in a.iter_mut() {
            *x = self.modulus.mul_shoup(*x, n_inv, n_inv_shoup);
        }
    }
}

/// Schoolbook negacyclic product, used as a reference.
pub fn negacyclic_schoolbook(a: &[u64], b: &[u64], q: &Modulus) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let p = q.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = q.add(out[k], p);
            } else {
                out[k - n] = q.sub(out[k - n], p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_poly(rng: &mut ChaCha20Rng, n: usize, q: u64) -> Vec<u64> {
        (0..n).map(|_| rng.gen_range(0..q)).collect()
    }

    #[test]
    fn forward_matches_direct_evaluation() {
        let n = 16;
        let q = Modulus::new(ntt_primes(40, n, 1, &[])[0]);
        let table = NttTable::new(q, n);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = random_poly(&mut rng, n, q.value());
        let mut fa = a.clone();
        table.forward(&mut fa);
        for (k, &value) in fa.iter().enumerate() {
            let point = q.pow(table.psi(), 2 * bit_reverse(k, table.log_degree()) as u64 + 1);
            let mut eval = 0u64;
            for &c in a.iter().rev() {
                eval = q.add(q.mul(eval, point), c);
            }
            assert_eq!(value, eval, "slot {k}");
        }
    }

    #[test]
    fn roundtrip_every_size_and_prime() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for log_n in 1..=12 {
            let n = 1 << log_n;
            for q in ntt_primes(60, n.max(1024), 2, &[]) {
                let table = NttTable::new(Modulus::new(q), n);
                let a = random_poly(&mut rng, n, q);
                let mut b = a.clone();
                table.forward(&mut b);
                table.inverse(&mut b);
                assert_eq!(a, b, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn pointwise_product_is_negacyclic_convolution() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for log_n in 1..=6 {
            let n = 1 << log_n;
            for bits in [30, 50, 61] {
                let q = Modulus::new(ntt_primes(bits, n, 1, &[])[0]);
                let table = NttTable::new(q, n);
                for _ in 0..5 {
                    let a = random_poly(&mut rng, n, q.value());
                    let b = random_poly(&mut rng, n, q.value());
                    let expected = negacyclic_schoolbook(&a, &b, &q);
                    let (mut fa, mut fb) = (a.clone(), b.clone());
                    table.forward(&mut fa);
                    table.forward(&mut fb);
                    let mut prod: Vec<u64> =
                        fa.iter().zip(&fb).map(|(&x, &y)| q.mul(x, y)).collect();
                    table.inverse(&mut prod);
                    assert_eq!(prod, expected);
                }
            }
        }
    }
}
