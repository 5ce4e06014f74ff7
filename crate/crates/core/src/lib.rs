//! Random quantum channels from classical expander variance profiles.
//!
//! The pipeline: a variance profile η ([`profile`]) and an entry law
//! ([`sampler`]) give random Kraus operators ([`channel`]); the channel is
//! renormalized to be exactly trace preserving, and its transfer operator is
//! analysed matrix-free ([`spectral`]). [`harness`] runs seeded sweeps and
//! fits the `s₂ ~ C/√d` law.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod profile;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use rng::SeedSpec;
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type VarianceProfile64 = profile::VarianceProfile<f64>;
pub type KrausEnsemble64 = channel::KrausEnsemble<f64>;
pub type TransferOperator64<'a> = channel::TransferOperator<'a, f64>;
pub type SigmaReport64 = channel::SigmaReport<f64>;
pub type MomentDecomposition64 = channel::MomentDecomposition<f64>;
pub type DensityMatrix64 = spectral::DensityMatrix<f64>;

pub type CMatrix32 = linalg::CMatrix<f32>;
pub type VarianceProfile32 = profile::VarianceProfile<f32>;
pub type KrausEnsemble32 = channel::KrausEnsemble<f32>;
