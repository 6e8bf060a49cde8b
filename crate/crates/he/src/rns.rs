//! Residue number system: a basis of NTT-friendly primes, polynomials stored
//! prime-major in that basis, and exact centered base conversion.

use num_bigint::BigUint;

use crate::arith::Modulus;
use crate::ntt::NttTable;

/// An ordered set of pairwise-coprime NTT primes sharing one ring degree.
#[derive(Clone, Debug)]
pub struct RnsBasis {
    degree: usize,
    moduli: Vec<Modulus>,
    tables: Vec<NttTable>,
}

impl RnsBasis {
    pub fn new(degree: usize, primes: &[u64]) -> Self {
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let tables = moduli.iter().map(|&m| NttTable::new(m, degree)).collect();
        Self {
            degree,
            moduli,
            tables,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn tables(&self) -> &[NttTable] {
        &self.tables
    }

    /// Product of all primes.
    pub fn product(&self) -> BigUint {
        self.moduli
            .iter()
            .fold(BigUint::from(1u32), |acc, m| acc * m.value())
    }

    /// Concatenation of two disjoint bases.
    pub fn join(&self, other: &RnsBasis) -> RnsBasis {
        assert_eq!(self.degree, other.degree);
        RnsBasis {
            degree: self.degree,
            moduli: self.moduli.iter().chain(&other.moduli).copied().collect(),
            tables: self.tables.iter().chain(&other.tables).cloned().collect(),
        }
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.len() * self.degree]
    }

    pub fn forward(&self, poly: &mut [u64]) {
        for (chunk, table) in poly.chunks_exact_mut(self.degree).zip(&self.tables) {
            table.forward(chunk);
        }
    }

    pub fn inverse(&self, poly: &mut [u64]) {
        for (chunk, table) in poly.chunks_exact_mut(self.degree).zip(&self.tables) {
            table.inverse(chunk);
        }
    }

    pub fn add_assign(&self, acc: &mut [u64], other: &[u64]) {
        for ((a, b), q) in acc
            .chunks_exact_mut(self.degree)
            .zip(other.chunks_exact(self.degree))
            .zip(&self.moduli)
        {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.add(*x, y);
            }
        }
    }

    pub fn sub_assign(&self, acc: &mut [u64], other: &[u64]) {
        for ((a, b), q) in acc
            .chunks_exact_mut(self.degree)
            .zip(other.chunks_exact(self.degree))
            .zip(&self.moduli)
        {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.sub(*x, y);
            }
        }
    }

    pub fn negate(&self, poly: &mut [u64]) {
        for (a, q) in poly.chunks_exact_mut(self.degree).zip(&self.moduli) {
            for x in a.iter_mut() {
                *x = q.neg(*x);
            }
        }
    }

    /// Pointwise product of two NTT-form polynomials.
    pub fn mul_pointwise(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut out = self.zero();
        for (((o, x), y), q) in out
            .chunks_exact_mut(self.degree)
            .zip(a.chunks_exact(self.degree))
            .zip(b.chunks_exact(self.degree))
            .zip(&self.moduli)
        {
            for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
                *o = q.mul(x, y);
            }
        }
        out
    }

    /// `acc += a * b` pointwise on NTT-form polynomials.
    pub fn mul_acc(&self, acc: &mut [u64], a: &[u64], b: &[u64]) {
        for (((o, x), y), q) in acc
            .chunks_exact_mut(self.degree)
            .zip(a.chunks_exact(self.degree))
            .zip(b.chunks_exact(self.degree))
            .zip(&self.moduli)
        {
            for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
                *o = q.add(*o, q.mul(x, y));
            }
        }
    }

    /// Residues of a polynomial with small signed coefficients.
    pub fn from_signed(&self, coeffs: &[i64]) -> Vec<u64> {
        debug_assert_eq!(coeffs.len(), self.degree);
        let mut out = Vec::with_capacity(self.len() * self.degree);
        for q in &self.moduli {
            out.extend(coeffs.iter().map(|&c| q.reduce_i64(c)));
        }
        out
    }

    /// Applies `X -> X^galois` to a coefficient-form polynomial.
    pub fn automorphism(&self, poly: &[u64], galois: usize) -> Vec<u64> {
        let n = self.degree;
        let mask = 2 * n - 1;
        let mut out = self.zero();
        for ((src, dst), q) in poly
            .chunks_exact(n)
            .zip(out.chunks_exact_mut(n))
            .zip(&self.moduli)
        {
            let mut index = 0usize;
            for &c in src {
                if index < n {
                    dst[index] = c;
                } else {
                    dst[index - n] = q.neg(c);
                }
                index = (index + galois) & mask;
            }
        }
        out
    }
}

/// Exact conversion of coefficient-form residues from one basis to another,
/// interpreting the input as its centered representative in `(-Q/2, Q/2]`.
///
/// The overflow count of the CRT sum is recovered in floating point; that is
/// exact unless a coefficient lies within `L * 2^-53 * Q` of the `±Q/2`
/// boundary.
#[derive(Clone, Debug)]
pub struct BaseConverter {
    from: Vec<Modulus>,
    to: Vec<Modulus>,
    /// (Q/q_i)^-1 mod q_i with Shoup companion.
    hat_inv: Vec<(u64, u64)>,
    /// 1 / q_i
    inv_float: Vec<f64>,
    /// (Q/q_i) mod p_j, indexed [j][i].
    hat_mod_to: Vec<Vec<u64>>,
    /// Q mod p_j
    product_mod_to: Vec<u64>,
}

impl BaseConverter {
    pub fn new(from: &RnsBasis, to: &RnsBasis) -> Self {
        let product = from.product();
        let hats: Vec<BigUint> = from.moduli.iter().map(|q| &product / q.value()).collect();
        let hat_inv = from
            .moduli
            .iter()
            .zip(&hats)
            .map(|(q, hat)| {
                let r = (hat % q.value()).iter_u64_digits().next().unwrap_or(0);
                let inv = q.inv(r).expect("bases are coprime");
                (inv, q.shoup(inv))
            })
            .collect();
        let reduce = |x: &BigUint, p: &Modulus| (x % p.value()).iter_u64_digits().next().unwrap_or(0);
        Self {
            from: from.moduli.clone(),
            to: to.moduli.clone(),
            hat_inv,
            inv_float: from.moduli.iter().map(|q| 1.0 / q.value() as f64).collect(),
            hat_mod_to: to
                .moduli
                .iter()
                .map(|p| hats.iter().map(|h| reduce(h, p)).collect())
                .collect(),
            product_mod_to: to.moduli.iter().map(|p| reduce(&product, p)).collect(),
        }
    }

    /// Converts a coefficient-form polynomial; output is prime-major in the
    /// target basis.
    pub fn convert(&self, input: &[u64], degree: usize) -> Vec<u64> {
        let l = self.from.len();
        let mut out = vec![0u64; self.to.len() * degree];
        let mut scaled = vec![0u64; l];
        for c in 0..degree {
            let mut overflow = 0.0f64;
            for i in 0..l {
                let (w, ws) = self.hat_inv[i];
                let a = self.from[i].mul_shoup(input[i * degree + c], w, ws);
                scaled[i] = a;
                overflow += a as f64 * self.inv_float[i];
            }
            let v = overflow.round() as u64;
            for (j, p) in self.to.iter().enumerate() {
                let mut acc: u128 = 0;
                for (&a, &h) in scaled.iter().zip(&self.hat_mod_to[j]) {
                    acc += a as u128 * h as u128;
                }
                let sum = p.reduce_wide(acc);
                let correction = p.mul(p.reduce(v), self.product_mod_to[j]);
                out[j * degree + c] = p.sub(sum, correction);
            }
        }
        out
    }
}

/// CRT reconstruction into big integers, used only for diagnostics.
pub fn reconstruct(basis: &RnsBasis, poly: &[u64]) -> Vec<BigUint> {
    let n = basis.degree;
    let product = basis.product();
    let weights: Vec<BigUint> = basis
        .moduli
        .iter()
        .map(|q| {
            let hat = &product / q.value();
            let r = (&hat % q.value()).iter_u64_digits().next().unwrap_or(0);
            hat * q.inv(r).expect("coprime basis")
        })
        .collect();
    (0..n)
        .map(|c| {
            let mut acc = BigUint::default();
            for (i, w) in weights.iter().enumerate() {
                acc += w * poly[i * n + c];
            }
            acc % &product
        })
        .collect()
}
