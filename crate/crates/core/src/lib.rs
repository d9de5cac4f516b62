//! Joint compression and encryption of bounded physiological signals.
//!
//! A signal `x` is cyclically shifted by a per-session integer key, projected
//! through a public Gaussian matrix, and optionally quantized. The key holder
//! removes the shift in the measurement domain and recovers `x` by orthogonal
//! matching pursuit in a sparsifying basis; without the key the shifted signal
//! is no longer sparse and recovery fails.
//!
//! The numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`, which is what the protocol layer uses.

pub mod codec;
mod error;
pub mod linalg;
pub mod recovery;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use scalar::Scalar;

pub use codec::{CarryVector, ShiftKey};
pub use recovery::{BasisKind, Quality};

pub type BoundedSignal = codec::BoundedSignal<f64>;
pub type CsCiphertext = codec::CsCiphertext<f64>;
pub type SensingMatrix = recovery::SensingMatrix<f64>;
pub type SparsityBasis = recovery::SparsityBasis<f64>;
pub type Dictionary = recovery::Dictionary<f64>;
pub type RecoveryParams = recovery::RecoveryParams<f64>;
pub type OmpSolution = recovery::OmpSolution<f64>;
pub type SyntheticSignal = recovery::SyntheticSignal<f64>;
