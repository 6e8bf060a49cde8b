//! Slot batching: the plaintext ring `Z_t[X]/(X^N + 1)` splits into `N`
//! independent slots because `t ≡ 1 (mod 2N)`.
//!
//! Slots form a `2 x N/2` matrix. Slot `i` lives in row `i / (N/2)` and
//! column `i % (N/2)`; column `c` of row 0 is the evaluation point `psi^(3^c)`
//! and of row 1 the point `psi^(-3^c)`. The automorphism `X -> X^(3^k)`
//! therefore rotates both rows left by `k` columns, and `X -> X^(2N-1)` swaps
//! the rows.

use crate::arith::Modulus;
use crate::error::{HeError, Result};
use crate::ntt::{bit_reverse, NttTable};
use crate::params::{Fingerprint, HeParams};

/// One value per slot, each reduced modulo the plaintext modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedPlaintext {
    slots: Vec<u64>,
    fingerprint: Fingerprint,
}

impl PackedPlaintext {
    /// Encodes signed values into the leading slots; the remaining slots are zero.
    pub fn encode(values: &[i64], params: &HeParams) -> Result<Self> {
        let n = params.slot_count();
        if values.len() > n {
            return Err(HeError::TooManyValues {
                len: values.len(),
                slots: n,
            });
        }
        let t = Modulus::new(params.plaintext_modulus);
        let mut slots = vec![0u64; n];
        for (slot, &v) in slots.iter_mut().zip(values) {
            *slot = t.reduce_i64(v);
        }
        Ok(Self {
            slots,
            fingerprint: params.fingerprint(),
        })
    }

    /// Builds a plaintext from slot values already reduced modulo `t`.
    pub fn from_slots(slots: Vec<u64>, params: &HeParams) -> Result<Self> {
        if slots.len() != params.slot_count() {
            return Err(HeError::Format(format!(
                "expected {} slots, got {}",
                params.slot_count(),
                slots.len()
            )));
        }
        if slots.iter().any(|&s| s >= params.plaintext_modulus) {
            return Err(HeError::Format("slot value not reduced mod t".into()));
        }
        Ok(Self {
            slots,
            fingerprint: params.fingerprint(),
        })
    }

    /// All slots set to the same value.
    pub fn constant(value: i64, params: &HeParams) -> Self {
        let t = Modulus::new(params.plaintext_modulus);
        Self {
            slots: vec![t.reduce_i64(value); params.slot_count()],
            fingerprint: params.fingerprint(),
        }
    }

    /// Slot values in `[0, t)`.
    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    /// Slot values mapped to the centered range `(-t/2, t/2]`.
    pub fn decode_signed(&self, params: &HeParams) -> Vec<i64> {
        let t = Modulus::new(params.plaintext_modulus);
        self.slots.iter().map(|&s| t.center(s)).collect()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub(crate) fn from_parts(slots: Vec<u64>, fingerprint: Fingerprint) -> Self {
        Self { slots, fingerprint }
    }
}

/// Maps between slot vectors and plaintext polynomial coefficients.
#[derive(Clone, Debug)]
pub struct SlotEncoder {
    table: NttTable,
    /// Position in the bit-reversed NTT output holding each slot.
    slot_to_ntt: Vec<usize>,
}

impl SlotEncoder {
    pub fn new(params: &HeParams) -> Self {
        let n = params.ring_degree;
        let table = NttTable::new(Modulus::new(params.plaintext_modulus), n);
        let two_n = 2 * n;
        let row = n / 2;
        let log_n = n.trailing_zeros();
        let mut slot_to_ntt = vec![0usize; n];
        let mut power = 1usize;
        for c in 0..row {
            // psi^e = psi^(2j+1) sits at NTT output index bitrev(j).
            let upper = power;
            let lower = two_n - power;
            slot_to_ntt[c] = bit_reverse((upper - 1) / 2, log_n);
            slot_to_ntt[row + c] = bit_reverse((lower - 1) / 2, log_n);
            power = power * 3 % two_n;
        }
        Self { table, slot_to_ntt }
    }

    pub fn plain_modulus(&self) -> &Modulus {
        self.table.modulus()
    }

    /// Coefficients (in `[0, t)`) of the polynomial whose slots are `slots`.
    pub fn slots_to_coeffs(&self, slots: &[u64]) -> Vec<u64> {
        let mut buf = vec![0u64; slots.len()];
        for (&pos, &v) in self.slot_to_ntt.iter().zip(slots) {
            buf[pos] = v;
        }
        self.table.inverse(&mut buf);
        buf
    }

    pub fn coeffs_to_slots(&self, coeffs: &[u64]) -> Vec<u64> {
        let mut buf = coeffs.to_vec();
        self.table.forward(&mut buf);
        self.slot_to_ntt.iter().map(|&pos| buf[pos]).collect()
    }
}

/// Galois element rotating rows left by `steps` columns.
pub fn rotation_galois_element(steps: usize, ring_degree: usize) -> usize {
    let two_n = 2 * ring_degree as u64;
    let mut g = 1u64;
    let mut base = 3u64;
    let mut e = steps as u64;
    while e > 0 {
        if e & 1 == 1 {
            g = g * base % two_n;
        }
        base = base * base % two_n;
        e >>= 1;
    }
    g as usize
}

/// Galois element swapping the two slot rows.
pub fn row_swap_galois_element(ring_degree: usize) -> usize {
    2 * ring_degree - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rns::RnsBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn small_params() -> HeParams {
        HeParams::generate("test", 32, &[50], 30, 1, &[16]).unwrap()
    }

    #[test]
    fn signed_values_map_to_representatives() {
        let params = small_params();
        let t = params.plaintext_modulus;
        let pt = PackedPlaintext::encode(&[1, -1, 0], &params).unwrap();
        assert_eq!(&pt.slots()[..4], &[1, t - 1, 0, 0]);
        assert_eq!(&pt.decode_signed(&params)[..3], &[1, -1, 0]);
    }

    #[test]
    fn too_long_vector_is_rejected() {
        let params = small_params();
        let err = PackedPlaintext::encode(&vec![1; 33], &params).unwrap_err();
        assert!(matches!(err, HeError::TooManyValues { len: 33, slots: 32 }));
    }

    #[test]
    fn zero_slots_encode_to_zero_polynomial() {
        let params = small_params();
        let enc = SlotEncoder::new(&params);
        assert!(enc.slots_to_coeffs(&[0; 32]).iter().all(|&c| c == 0));
    }

    #[test]
    fn slot_roundtrip() {
        let params = small_params();
        let enc = SlotEncoder::new(&params);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..100 {
            let slots: Vec<u64> = (0..32)
                .map(|_| rng.gen_range(0..params.plaintext_modulus))
                .collect();
            assert_eq!(enc.coeffs_to_slots(&enc.slots_to_coeffs(&slots)), slots);
        }
    }

    #[test]
    fn slot_product_is_ring_product() {
        let params = small_params();
        let enc = SlotEncoder::new(&params);
        let t = *enc.plain_modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a: Vec<u64> = (0..32).map(|_| rng.gen_range(0..t.value())).collect();
        let b: Vec<u64> = (0..32).map(|_| rng.gen_range(0..t.value())).collect();
        let prod = crate::ntt::negacyclic_schoolbook(
            &enc.slots_to_coeffs(&a),
            &enc.slots_to_coeffs(&b),
            &t,
        );
        let expected: Vec<u64> = a.iter().zip(&b).map(|(&x, &y)| t.mul(x, y)).collect();
        assert_eq!(enc.coeffs_to_slots(&prod), expected);
    }

    #[test]
    fn automorphisms_permute_slots() {
        let params = small_params();
        let n = 32;
        let row = n / 2;
        let enc = SlotEncoder::new(&params);
        let basis = RnsBasis::new(n, &[params.plaintext_modulus]);
        let slots: Vec<u64> = (1..=n as u64).collect();
        let coeffs = enc.slots_to_coeffs(&slots);
        for steps in [1usize, 3, 8] {
            let rotated = enc.coeffs_to_slots(
                &basis.automorphism(&coeffs, rotation_galois_element(steps, n)),
            );
            for i in 0..n {
                let r = i / row;
                let c = i % row;
                assert_eq!(rotated[i], slots[r * row + (c + steps) % row]);
            }
        }
        let swapped = enc.coeffs_to_slots(&basis.automorphism(&coeffs, row_swap_galois_element(n)));
        for i in 0..n {
            assert_eq!(swapped[i], slots[(i + row) % n]);
        }
    }
}
