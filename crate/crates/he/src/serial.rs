//! Binary container format for keys, plaintexts and ciphertexts.
//!
//! Layout: `"HEGR"`, u8 version, u8 type tag, 32-byte parameter fingerprint,
//! then little-endian u64 words: auxiliary word count, auxiliary words, part
//! count, and the parts' residues in prime-major, coefficient-minor order.

use std::collections::BTreeMap;

use crate::batch::PackedPlaintext;
use crate::bfv::Ciphertext;
use crate::error::{HeError, Result};
use crate::keys::{EvalKeys, KeySwitchKey, PublicKey, SecretKey};
use crate::params::{Fingerprint, HeParams};

pub const MAGIC: &[u8; 4] = b"HEGR";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjectType {
    SecretKey = 1,
    PublicKey = 2,
    EvalKeys = 3,
    Plaintext = 4,
    Ciphertext = 5,
}

impl ObjectType {
    fn name(self) -> &'static str {
        match self {
            ObjectType::SecretKey => "secret key",
            ObjectType::PublicKey => "public key",
            ObjectType::EvalKeys => "evaluation keys",
            ObjectType::Plaintext => "plaintext",
            ObjectType::Ciphertext => "ciphertext",
        }
    }
}

/// Reads the type tag of a container without decoding it.
pub fn peek_type(bytes: &[u8]) -> Result<u8> {
    header(bytes).map(|(tag, _)| tag)
}

fn header(bytes: &[u8]) -> Result<(u8, Fingerprint)> {
    if bytes.len() < 4 {
        return Err(HeError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(HeError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(HeError::Truncated);
    }
    if bytes[4] != VERSION {
        return Err(HeError::UnsupportedVersion(bytes[4]));
    }
    let mut fp = [0u8; 32];
    fp.copy_from_slice(&bytes[6..HEADER_LEN]);
    Ok((bytes[5], Fingerprint(fp)))
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: ObjectType, fingerprint: Fingerprint, aux: &[u64], parts: usize) -> Self {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (aux.len() + 2));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(kind as u8);
        out.extend_from_slice(&fingerprint.0);
        let mut w = Writer(out);
        w.word(aux.len() as u64);
        for &a in aux {
            w.word(a);
        }
        w.word(parts as u64);
        w
    }

    fn word(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn part(&mut self, limbs: &[u64]) {
        self.0.reserve(8 * limbs.len());
        for &x in limbs {
            self.word(x);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    aux: Vec<u64>,
    parts: usize,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], kind: ObjectType, params: &HeParams) -> Result<Self> {
        let (tag, fp) = header(bytes)?;
        if tag != kind as u8 {
            return Err(HeError::WrongObjectType {
                expected: kind.name(),
                found: tag,
            });
        }
        if fp != params.fingerprint() {
            return Err(HeError::FingerprintMismatch);
        }
        let mut r = Reader {
            bytes,
            pos: HEADER_LEN,
            aux: Vec::new(),
            parts: 0,
        };
        let aux_count = r.word()?;
        if aux_count > 1 << 20 {
            return Err(HeError::Format("implausible auxiliary word count".into()));
        }
        r.aux = (0..aux_count).map(|_| r.word()).collect::<Result<_>>()?;
        r.parts = usize::try_from(r.word()?).map_err(|_| HeError::Truncated)?;
        Ok(r)
    }

    fn word(&mut self) -> Result<u64> {
        let end = self.pos + 8;
        let chunk = self.bytes.get(self.pos..end).ok_or(HeError::Truncated)?;
        self.pos = end;
        Ok(u64::from_le_bytes(chunk.try_into().expect("8-byte chunk")))
    }

    /// One part of `len` limbs, each checked against its modulus.
    fn part(&mut self, len: usize, moduli: &[u64], degree: usize) -> Result<Vec<u64>> {
        let bytes_len = len.checked_mul(8).ok_or(HeError::Truncated)?;
        let chunk = self
            .bytes
            .get(self.pos..self.pos + bytes_len)
            .ok_or(HeError::Truncated)?;
        self.pos += bytes_len;
        let limbs: Vec<u64> = chunk
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        for (i, &q) in moduli.iter().enumerate() {
            if limbs[i * degree..(i + 1) * degree].iter().any(|&x| x >= q) {
                return Err(HeError::Format("residue out of range".into()));
            }
        }
        Ok(limbs)
    }

    fn q_part(&mut self, params: &HeParams) -> Result<Vec<u64>> {
        let n = params.ring_degree;
        self.part(n * params.coeff_modulus.len(), &params.coeff_modulus, n)
    }

    fn expect_parts(&self, n: usize) -> Result<()> {
        if self.parts == n {
            Ok(())
        } else {
            Err(HeError::Format(format!("expected {n} parts, found {}", self.parts)))
        }
    }

    fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(HeError::Format("trailing bytes after container".into()))
        }
    }
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ObjectType::SecretKey, self.fingerprint, &[], 1);
        w.part(&self.poly);
        w.0
    }

    pub fn from_bytes(bytes: &[u8], params: &HeParams) -> Result<Self> {
        let mut r = Reader::open(bytes, ObjectType::SecretKey, params)?;
        r.expect_parts(1)?;
        let poly = r.q_part(params)?;
        r.finish()?;
        Ok(Self {
            fingerprint: params.fingerprint(),
            poly,
        })
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ObjectType::PublicKey, self.fingerprint, &[], 2);
        w.part(&self.parts[0]);
        w.part(&self.parts[1]);
        w.0
    }

    pub fn from_bytes(bytes: &[u8], params: &HeParams) -> Result<Self> {
        let mut r = Reader::open(bytes, ObjectType::PublicKey, params)?;
        r.expect_parts(2)?;
        let b = r.q_part(params)?;
        let a = r.q_part(params)?;
        r.finish()?;
        Ok(Self {
            fingerprint: params.fingerprint(),
            parts: [b, a],
        })
    }
}

impl EvalKeys {
    /// Auxiliary words: digit count, Galois key count, Galois elements.
    pub fn to_bytes(&self) -> Vec<u8> {
        let digits = self.relin.digits.len();
        let mut aux = vec![digits as u64, self.galois.len() as u64];
        aux.extend(self.galois.keys().map(|&e| e as u64));
        let keys = std::iter::once(&self.relin).chain(self.galois.values());
        let parts = 2 * digits * (1 + self.galois.len());
        let mut w = Writer::new(ObjectType::EvalKeys, self.fingerprint, &aux, parts);
        for key in keys {
            for [b, a] in &key.digits {
                w.part(b);
                w.part(a);
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8], params: &HeParams) -> Result<Self> {
        let mut r = Reader::open(bytes, ObjectType::EvalKeys, params)?;
        let bad = |m: &str| HeError::Format(format!("evaluation keys: {m}"));
        if r.aux.len() < 2 {
            return Err(bad("missing header words"));
        }
        let digits = r.aux[0] as usize;
        let n_galois = r.aux[1] as usize;
        if digits != params.coeff_modulus.len() {
            return Err(bad("digit count does not match the coefficient modulus"));
        }
        if r.aux.len() != 2 + n_galois {
            return Err(bad("Galois element list length"));
        }
        let elements: Vec<usize> = r.aux[2..].iter().map(|&e| e as usize).collect();
        let two_n = 2 * params.ring_degree;
        if elements.iter().any(|&e| e % 2 == 0 || e >= two_n) {
            return Err(bad("invalid Galois element"));
        }
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("Galois elements not strictly ascending"));
        }
        r.expect_parts(2 * digits * (1 + n_galois))?;
        let read_key = |r: &mut Reader| -> Result<KeySwitchKey> {
            let digits = (0..digits)
                .map(|_| Ok([r.q_part(params)?, r.q_part(params)?]))
                .collect::<Result<_>>()?;
            Ok(KeySwitchKey { digits })
        };
        let relin = read_key(&mut r)?;
        let mut galois = BTreeMap::new();
        for e in elements {
            galois.insert(e, read_key(&mut r)?);
        }
        r.finish()?;
        Ok(Self {
            fingerprint: params.fingerprint(),
            relin,
            galois,
        })
    }
}

impl PackedPlaintext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ObjectType::Plaintext, self.fingerprint(), &[], 1);
        w.part(self.slots());
        w.0
    }

    pub fn from_bytes(bytes: &[u8], params: &HeParams) -> Result<Self> {
        let mut r = Reader::open(bytes, ObjectType::Plaintext, params)?;
        r.expect_parts(1)?;
        let n = params.ring_degree;
        let slots = r.part(n, &[params.plaintext_modulus], n)?;
        r.finish()?;
        PackedPlaintext::from_slots(slots, params)
    }
}

impl Ciphertext {
    /// Auxiliary word: remaining level.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(
            ObjectType::Ciphertext,
            self.fingerprint,
            &[self.level as u64],
            self.parts.len(),
        );
        for part in &self.parts {
            w.part(part);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8], params: &HeParams) -> Result<Self> {
        let mut r = Reader::open(bytes, ObjectType::Ciphertext, params)?;
        if r.aux.len() != 1 {
            return Err(HeError::Format("ciphertext header words".into()));
        }
        let level = r.aux[0] as usize;
        if level > params.depth_budget {
            return Err(HeError::Format("ciphertext level exceeds depth budget".into()));
        }
        if !(2..=3).contains(&r.parts) {
            return Err(HeError::UnexpectedParts(r.parts));
        }
        let parts = (0..r.parts)
            .map(|_| r.q_part(params))
            .collect::<Result<_>>()?;
        r.finish()?;
        Ok(Self {
            parts,
            level,
            fingerprint: params.fingerprint(),
        })
    }
}
