use rand::{CryptoRng, RngCore};

use crate::batch::PackedPlaintext;
use crate::error::{HeError, Result};
use crate::params::HeParams;

/// The slot-wise operation contract shared by the encrypted scheme and its
/// cleartext mirror. Circuits written against this trait run unchanged on
/// either backend.
///
/// Rotation semantics: slots form two rows of `N/2`; `rotate(a, k)` moves
/// slot `(r, c + k)` to `(r, c)` within each row, and `swap_rows` exchanges
/// the rows.
pub trait Backend: Send + Sync {
    type Ciphertext: Clone + Send + Sync;
    type Plaintext: Send + Sync;

    fn params(&self) -> &HeParams;

    fn prepare(&self, pt: &PackedPlaintext) -> Result<Self::Plaintext>;

    fn encrypt<R: RngCore + CryptoRng>(&self, pt: &PackedPlaintext, rng: &mut R)
        -> Result<Self::Ciphertext>;

    /// Remaining ciphertext-ciphertext multiplications.
    fn level(&self, ct: &Self::Ciphertext) -> usize;

    fn add(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    fn sub(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    fn negate(&self, a: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    fn add_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext>;
    fn sub_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext>;
    fn mul_plain(&self, a: &Self::Ciphertext, p: &Self::Plaintext) -> Result<Self::Ciphertext>;
    /// Ciphertext product, relinearized; consumes one level.
    fn mul(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    fn rotate(&self, a: &Self::Ciphertext, steps: i64) -> Result<Self::Ciphertext>;
    fn swap_rows(&self, a: &Self::Ciphertext) -> Result<Self::Ciphertext>;

    fn encode(&self, values: &[i64]) -> Result<Self::Plaintext> {
        self.prepare(&PackedPlaintext::encode(values, self.params())?)
    }

    fn constant(&self, value: i64) -> Result<Self::Plaintext> {
        self.prepare(&PackedPlaintext::constant(value, self.params()))
    }

    /// Rotate-and-add over aligned blocks of `width` slots: afterwards slot
    /// `s·width` holds the sum of block `s`. Widths up to `N/2` stay within a
    /// row; width `N` also folds the two rows together.
    fn sum_slots(&self, a: &Self::Ciphertext, width: usize) -> Result<Self::Ciphertext> {
        let n = self.params().slot_count();
        if !width.is_power_of_two() || width > n {
            return Err(HeError::InvalidSumWidth(width));
        }
        let row = n / 2;
        let mut acc = a.clone();
        let mut step = width.min(row) / 2;
        while step >= 1 {
            let rotated = self.rotate(&acc, step as i64)?;
            acc = self.add(&acc, &rotated)?;
            step /= 2;
        }
        if width == n {
            let swapped = self.swap_rows(&acc)?;
            acc = self.add(&acc, &swapped)?;
        }
        Ok(acc)
    }
}
