//! Word-sized modular arithmetic.
//!
//! Every modulus used by the scheme fits in 62 bits so that the lazy NTT
//! butterflies can keep values in `[0, 4q)` without overflowing a `u64`.

/// Largest supported modulus bit width.
pub const MAX_MODULUS_BITS: u32 = 61;

/// A word-sized modulus with precomputed Barrett constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    /// floor(2^128 / value) split into (low, high) words.
    ratio: (u64, u64),
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value >= 2, "modulus must be at least 2");
        assert!(
            64 - value.leading_zeros() <= MAX_MODULUS_BITS,
            "modulus {value} exceeds {MAX_MODULUS_BITS} bits"
        );
        // floor((2^128 - 1) / q) == floor(2^128 / q) unless q divides 2^128,
        // which cannot happen for the odd moduli used here.
        let ratio = u128::MAX / value as u128;
        Self {
            value,
            ratio: (ratio as u64, (ratio >> 64) as u64),
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    /// Reduces a 128-bit value known to be below `q * 2^64`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let x0 = x as u64;
        let x1 = (x >> 64) as u64;
        let (r0, r1) = self.ratio;
        let low = x0 as u128 * r0 as u128;
        let mid1 = x1 as u128 * r0 as u128;
        let mid2 = x0 as u128 * r1 as u128;
        let high = x1 as u128 * r1 as u128;
        let mask = u64::MAX as u128;
        let carry = ((low >> 64) + (mid1 & mask) + (mid2 & mask)) >> 64;
        let quotient = (high + (mid1 >> 64) + (mid2 >> 64) + carry) as u64;
        let mut r = x0.wrapping_sub(quotient.wrapping_mul(self.value));
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    /// Reduces an arbitrary 128-bit value.
    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let hi = self.reduce((x >> 64) as u64);
        self.reduce_u128(((hi as u128) << 64) | (x as u64 as u128))
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            self.reduce_u128(x as u128)
        }
    }

    /// Maps a signed integer to its representative in `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    /// Maps a signed 128-bit integer to its representative in `[0, q)`.
    pub fn reduce_i128(&self, x: i128) -> u64 {
        let r = self.reduce_wide(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputes `floor(w * 2^64 / q)` for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` given `w_shoup = self.shoup(w)`; the result lies in `[0, 2q)`.
    #[inline]
    pub fn mul_shoup_lazy(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value))
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let r = self.mul_shoup_lazy(a, w, w_shoup);
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Modular inverse; `None` when `a` shares a factor with the modulus.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let (mut old_r, mut r) = (self.reduce(a) as i128, self.value as i128);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        if old_r != 1 {
            return None;
        }
        Some(old_s.rem_euclid(self.value as i128) as u64)
    }

    /// Centered representative of `a` in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    let mulmod = |a: u64, b: u64| (a as u128 * b as u128 % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Returns `count` distinct primes `p ≡ 1 (mod 2n)` of exactly `bits` bits,
/// scanning downward from `2^bits`, skipping anything in `exclude`.
pub fn ntt_primes(bits: u32, ring_degree: usize, count: usize, exclude: &[u64]) -> Vec<u64> {
    assert!((2..=62).contains(&bits));
    let step = 2 * ring_degree as u64;
    let lower = 1u64 << (bits - 1);
    let mut candidate = (1u64 << bits) - step + 1;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        assert!(candidate > lower, "ran out of {bits}-bit NTT primes for N={ring_degree}");
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

/// Finds a generator of the multiplicative group modulo the prime `q`.
fn multiplicative_generator(q: &Modulus) -> u64 {
    let order = q.value() - 1;
    let mut factors = Vec::new();
    let mut rest = order;
    let mut f = 2u64;
    while f * f <= rest {
        if rest % f == 0 {
            factors.push(f);
            while rest % f == 0 {
                rest /= f;
            }
        }
        f += 1;
    }
    if rest > 1 {
        factors.push(rest);
    }
    (2..q.value())
        .find(|&g| factors.iter().all(|&p| q.pow(g, order / p) != 1))
        .expect("prime modulus has a generator")
}

/// Smallest primitive `2n`-th root of unity modulo the prime `q`.
///
/// Picking the minimum among all primitive roots makes the choice canonical,
/// so every context built from the same parameters agrees on slot order.
pub fn minimal_primitive_root(q: &Modulus, two_n: u64) -> u64 {
    assert_eq!((q.value() - 1) % two_n, 0, "modulus is not 1 mod {two_n}");
    let g = multiplicative_generator(q);
    let root = q.pow(g, (q.value() - 1) / two_n);
    // Primitive roots are root^k for odd k.
    let square = q.mul(root, root);
    let mut best = root;
    let mut current = root;
    for _ in 1..two_n / 2 {
        current = q.mul(current, square);
        best = best.min(current);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q: u64 = 0x1fff_ffff_ffe0_0001;

    #[test]
    fn primes_have_requested_shape() {
        let ps = ntt_primes(50, 4096, 4, &[]);
        assert_eq!(ps.len(), 4);
        for p in ps {
            assert!(is_prime(p));
            assert_eq!(p % 8192, 1);
            assert_eq!(64 - p.leading_zeros(), 50);
        }
    }

    #[test]
    fn miller_rabin_known_values() {
        assert!(is_prime(2));
        assert!(is_prime(65537));
        assert!(is_prime(0xffff_ffff_0000_0001));
        assert!(!is_prime(1));
        assert!(!is_prime(561));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn primitive_root_has_exact_order() {
        let q = Modulus::new(ntt_primes(40, 1024, 1, &[])[0]);
        let root = minimal_primitive_root(&q, 2048);
        assert_eq!(q.pow(root, 1024), q.value() - 1);
        assert_eq!(q.pow(root, 2048), 1);
    }

    #[test]
    fn inverse_roundtrip() {
        let q = Modulus::new(1_000_000_007);
        for a in [1u64, 2, 12345, 999_999_999] {
            let inv = q.inv(a).unwrap();
            assert_eq!(q.mul(a, inv), 1);
        }
        assert_eq!(Modulus::new(15).inv(5), None);
    }

    proptest! {
        #[test]
        fn barrett_matches_u128_remainder(a in 0..Q, b in 0..Q) {
            let q = Modulus::new(Q);
            prop_assert_eq!(q.mul(a, b), (a as u128 * b as u128 % Q as u128) as u64);
        }

        #[test]
        fn shoup_matches_barrett(a in 0..Q, w in 0..Q) {
            let q = Modulus::new(Q);
            prop_assert_eq!(q.mul_shoup(a, w, q.shoup(w)), q.mul(a, w));
        }

        #[test]
        fn wide_reduction(x in any::<u128>()) {
            let q = Modulus::new(Q);
            prop_assert_eq!(q.reduce_wide(x), (x % Q as u128) as u64);
            let t = Modulus::new(1_099_511_922_689);
            prop_assert_eq!(t.reduce_wide(x), (x % 1_099_511_922_689u128) as u64);
        }

        #[test]
        fn signed_reduction(x in any::<i64>()) {
            let q = Modulus::new(Q);
            prop_assert_eq!(q.reduce_i64(x), x.rem_euclid(Q as i64) as u64);
        }
    }
}
