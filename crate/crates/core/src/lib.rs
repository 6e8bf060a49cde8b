//! Encrypted one-vs-all SVM and depth-2 tree ensemble inference over ternary
//! copy-number features.
//!
//! The circuits in [`encoding`], [`trees`] and [`svm`] are generic over
//! [`hedgerow_he::Backend`], so the same code runs encrypted or against the
//! cleartext mirror. [`pipeline`] ties them into client and server roles.

pub mod encoding;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod svm;
pub mod trees;

pub use error::{Error, Result};
