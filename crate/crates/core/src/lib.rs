//! Blind multi-user activity detection for grant-free SCMA and MUSA uplinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`codes`] builds SCMA codebooks and MUSA spreading-sequence sets and
//!   allocates sequences to device clusters.
//! - [`channel`] samples macro-cell and indoor-factory mmWave channels.
//! - [`datagen`] synthesises labelled pilot measurements and persists them.
//! - [`neural`] is the pre-activated residual detector, trained with
//!   hand-written backpropagation and Adam.
//! - [`baselines`] holds the stagewise and block least-squares greedy
//!   sparse-recovery detectors.
//! - [`analysis`] computes detection metrics, calibration curves, FLOPs and
//!   the pair-coverage bound for random label sets.
//!
//! Numerical code is generic over [`Scalar`] (`f32` / `f64`); the aliases
//! below pin the common instantiations.

pub mod analysis;
pub mod baselines;
pub mod channel;
pub mod codes;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod neural;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Complex sample type used throughout.
pub type Complex<F> = num_complex::Complex<F>;

/// Single-precision detector, the training default.
pub type MudNetwork32 = neural::MudNetwork<f32>;
/// Double-precision detector, used for gradient checks.
pub type MudNetwork64 = neural::MudNetwork<f64>;
/// Complex matrix in double precision.
pub type CMatrix64 = linalg::CMatrix<f64>;
/// Complex matrix in single precision.
pub type CMatrix32 = linalg::CMatrix<f32>;
