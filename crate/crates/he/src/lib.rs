//! Exact batched RLWE homomorphic encryption with a cleartext mirror.
//!
//! [`HeContext`] holds the precomputation for one [`HeParams`]; [`keygen`]
//! derives all keys from a seed. Circuits are written against the
//! [`Backend`] trait and run on either [`HeBackend`] (encrypted) or
//! [`ClearBackend`] (plain slot vectors with identical checks).

pub mod arith;
pub mod backend;
pub mod batch;
pub mod bfv;
pub mod clear;
pub mod context;
pub mod counting;
pub mod error;
pub mod keys;
pub mod ntt;
pub mod params;
pub mod rns;
pub mod serial;

pub use backend::Backend;
pub use batch::PackedPlaintext;
pub use bfv::{Ciphertext, HeBackend, HePlaintext};
pub use clear::{ClearBackend, ClearCiphertext};
pub use context::HeContext;
pub use counting::{CountingBackend, OpCounts};
pub use error::{HeError, Result};
pub use keys::{keygen, EvalKeys, PublicKey, SecretKey};
pub use params::{Fingerprint, HeParams, Preset};
pub use serial::ObjectType;
