use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::arith::{is_prime, ntt_primes, MAX_MODULUS_BITS};
use crate::error::{HeError, Result};

/// Named parameter sets sized for the inference circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// One plaintext product plus rotations (linear SVM).
    SvmD1,
    /// Comparison gadget plus tree scoring (plaintext model).
    XgbD2,
    /// Either split codes or leaves encrypted: one extra level.
    XgbEncModelD3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::SvmD1, Preset::XgbD2, Preset::XgbEncModelD3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SvmD1 => "svm-d1",
            Preset::XgbD2 => "xgb-d2",
            Preset::XgbEncModelD3 => "xgb-encmodel-d3",
        }
    }
}

impl FromStr for Preset {
    type Err = HeError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HeError::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bit width of the default plaintext prime.
pub const DEFAULT_PLAIN_BITS: u32 = 40;

/// Scheme parameters. Every field is public data; the fingerprint binds keys
/// and ciphertexts to one exact parameter set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeParams {
    pub preset_name: String,
    pub ring_degree: usize,
    pub coeff_modulus: Vec<u64>,
    pub plaintext_modulus: u64,
    pub depth_budget: usize,
    /// Slot-sum widths the Galois keys must support.
    pub sum_widths: Vec<usize>,
}

impl HeParams {
    /// Parameters for a named preset.
    pub fn preset(preset: Preset) -> Self {
        let (degree, coeff_bits, widths): (usize, &[u32], &[usize]) = match preset {
            Preset::SvmD1 => (8192, &[60, 60, 60, 38], &[2048]),
            Preset::XgbD2 => (16384, &[60, 60, 60, 60, 60, 60], &[128]),
            Preset::XgbEncModelD3 => (16384, &[60, 60, 60, 60, 60, 60], &[128]),
        };
        let depth = match preset {
            Preset::SvmD1 => 1,
            Preset::XgbD2 => 2,
            Preset::XgbEncModelD3 => 3,
        };
        Self::generate(preset.name(), degree, coeff_bits, DEFAULT_PLAIN_BITS, depth, widths)
            .expect("preset parameters are valid")
    }

    /// Looks up a preset by name.
    pub fn from_preset_name(name: &str) -> Result<Self> {
        Ok(Self::preset(name.parse()?))
    }

    /// Builds a parameter set by searching for primes of the requested sizes.
    pub fn generate(
        name: &str,
        ring_degree: usize,
        coeff_bits: &[u32],
        plain_bits: u32,
        depth_budget: usize,
        sum_widths: &[usize],
    ) -> Result<Self> {
        if !ring_degree.is_power_of_two() || ring_degree < 2 {
            return Err(HeError::InvalidParams(format!(
                "ring degree {ring_degree} is not a power of two"
            )));
        }
        let mut coeff_modulus: Vec<u64> = Vec::new();
        for &bits in coeff_bits {
            if !(20..=MAX_MODULUS_BITS).contains(&bits) {
                return Err(HeError::InvalidParams(format!(
                    "coefficient prime size {bits} outside 20..={MAX_MODULUS_BITS}"
                )));
            }
            let p = ntt_primes(bits, ring_degree, 1, &coeff_modulus)[0];
            coeff_modulus.push(p);
        }
        let plaintext_modulus = ntt_primes(plain_bits, ring_degree, 1, &coeff_modulus)[0];
        let params = Self {
            preset_name: name.to_string(),
            ring_degree,
            coeff_modulus,
            plaintext_modulus,
            depth_budget,
            sum_widths: sum_widths.to_vec(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn slot_count(&self) -> usize {
        self.ring_degree
    }

    /// Length of one rotation row.
    pub fn row_size(&self) -> usize {
        self.ring_degree / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HeError::InvalidParams(msg));
        let n = self.ring_degree;
        if !n.is_power_of_two() || n < 4 {
            return bad(format!("ring degree {n} must be a power of two >= 4"));
        }
        let two_n = 2 * n as u64;
        if self.coeff_modulus.is_empty() {
            return bad("empty coefficient modulus".into());
        }
        for (i, &q) in self.coeff_modulus.iter().enumerate() {
            if 64 - q.leading_zeros() > MAX_MODULUS_BITS {
                return bad(format!("prime {q} exceeds {MAX_MODULUS_BITS} bits"));
            }
            if !is_prime(q) || q % two_n != 1 {
                return bad(format!("{q} is not a prime congruent to 1 mod {two_n}"));
            }
            if self.coeff_modulus[..i].contains(&q) {
                return bad(format!("duplicate prime {q}"));
            }
        }
        let t = self.plaintext_modulus;
        if 64 - t.leading_zeros() > MAX_MODULUS_BITS || !is_prime(t) || t % two_n != 1 {
            return bad(format!("plaintext modulus {t} is not a prime congruent to 1 mod {two_n}"));
        }
        if self.coeff_modulus.contains(&t) {
            return bad("plaintext modulus coincides with a coefficient prime".into());
        }
        if self.depth_budget == 0 {
            return bad("depth budget must be at least 1".into());
        }
        for &w in &self.sum_widths {
            if !w.is_power_of_two() || w > n {
                return bad(format!("sum width {w} must be a power of two <= {n}"));
            }
        }
        Ok(())
    }

    /// Rotation steps (left, within a row) whose keys the declared sum widths need.
    pub fn required_rotation_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = Vec::new();
        for &w in &self.sum_widths {
            let mut step = w.min(self.row_size()) / 2;
            while step >= 1 {
                if !steps.contains(&step) {
                    steps.push(step);
                }
                step /= 2;
            }
        }
        steps.sort_unstable();
        steps
    }

    /// Whether any declared width spans both rows and so needs the row swap.
    pub fn requires_row_swap(&self) -> bool {
        self.sum_widths.iter().any(|&w| w == self.ring_degree)
    }

    pub fn coeff_modulus_bits(&self) -> u32 {
        self.coeff_modulus
            .iter()
            .map(|q| 64 - q.leading_zeros())
            .sum()
    }

    /// Canonical `key=value` text form.
    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let widths: Vec<u64> = self.sum_widths.iter().map(|&w| w as u64).collect();
        format!(
            "preset={}\nring_degree={}\ncoeff_modulus={}\nplaintext_modulus={}\ndepth_budget={}\nsum_widths={}\n",
            self.preset_name,
            self.ring_degree,
            join(&self.coeff_modulus),
            self.plaintext_modulus,
            self.depth_budget,
            join(&widths),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut preset_name = None;
        let mut ring_degree = None;
        let mut coeff_modulus = None;
        let mut plaintext_modulus = None;
        let mut depth_budget = None;
        let mut sum_widths = Some(Vec::new());
        let parse_err = |line: &str| HeError::Format(format!("bad params line `{line}`"));
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| parse_err(line))?;
            let (key, value) = (key.trim(), value.trim());
            let list = |v: &str| -> Result<Vec<u64>> {
                if v.is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|x| x.trim().parse::<u64>().map_err(|_| parse_err(line)))
                    .collect()
            };
            match key {
                "preset" => preset_name = Some(value.to_string()),
                "ring_degree" => ring_degree = Some(value.parse().map_err(|_| parse_err(line))?),
                "coeff_modulus" => coeff_modulus = Some(list(value)?),
                "plaintext_modulus" => {
                    plaintext_modulus = Some(value.parse().map_err(|_| parse_err(line))?)
                }
                "depth_budget" => depth_budget = Some(value.parse().map_err(|_| parse_err(line))?),
                "sum_widths" => {
                    sum_widths = Some(list(value)?.into_iter().map(|w| w as usize).collect())
                }
                _ => return Err(HeError::Format(format!("unknown params key `{key}`"))),
            }
        }
        let missing = |k: &str| HeError::Format(format!("params missing `{k}`"));
        let params = Self {
            preset_name: preset_name.ok_or_else(|| missing("preset"))?,
            ring_degree: ring_degree.ok_or_else(|| missing("ring_degree"))?,
            coeff_modulus: coeff_modulus.ok_or_else(|| missing("coeff_modulus"))?,
            plaintext_modulus: plaintext_modulus.ok_or_else(|| missing("plaintext_modulus"))?,
            depth_budget: depth_budget.ok_or_else(|| missing("depth_budget"))?,
            sum_widths: sum_widths.unwrap_or_default(),
        };
        params.validate()?;
        Ok(params)
    }

    /// SHA-256 over the canonical text form.
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(Sha256::digest(self.to_text().as_bytes()).into())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        f.write_str("…")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_declared_depths() {
        assert_eq!(HeParams::preset(Preset::SvmD1).depth_budget, 1);
        assert_eq!(HeParams::preset(Preset::XgbD2).depth_budget, 2);
        assert_eq!(HeParams::preset(Preset::XgbEncModelD3).depth_budget, 3);
    }

    #[test]
    fn preset_invariants() {
        for preset in Preset::ALL {
            let p = HeParams::preset(preset);
            p.validate().unwrap();
            assert_eq!(p.slot_count(), p.ring_degree);
            let two_n = 2 * p.ring_degree as u64;
            assert_eq!(p.plaintext_modulus % two_n, 1);
            assert!(p.coeff_modulus.iter().all(|q| q % two_n == 1));
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(matches!(
            HeParams::from_preset_name("svm-d9"),
            Err(HeError::UnknownPreset(_))
        ));
    }

    #[test]
    fn text_roundtrip_preserves_fingerprint() {
        let p = HeParams::preset(Preset::XgbD2);
        let q = HeParams::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.fingerprint(), q.fingerprint());
        assert_ne!(p.fingerprint(), HeParams::preset(Preset::SvmD1).fingerprint());
    }

    #[test]
    fn rotation_steps_follow_widths() {
        let mut p = HeParams::generate("t", 64, &[40], 20, 1, &[16]).unwrap();
        assert_eq!(p.required_rotation_steps(), vec![1, 2, 4, 8]);
        assert!(!p.requires_row_swap());
        p.sum_widths = vec![64, 4];
        assert_eq!(p.required_rotation_steps(), vec![1, 2, 4, 8, 16]);
        assert!(p.requires_row_swap());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = HeParams::preset(Preset::SvmD1);
        p.depth_budget = 0;
        assert!(p.validate().is_err());
        let mut p = HeParams::preset(Preset::SvmD1);
        p.coeff_modulus.push(p.coeff_modulus[0]);
        assert!(p.validate().is_err());
        let mut p = HeParams::preset(Preset::SvmD1);
        p.plaintext_modulus += 2;
        assert!(p.validate().is_err());
    }
}
