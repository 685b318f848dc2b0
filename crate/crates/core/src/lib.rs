//! Verifiable PAC-private mechanisms.
//!
//! Mechanisms (K-means, linear SVM, filtered database statistics) run through
//! a [`TraceRecorder`] so their operation sequence depends only on input
//! shapes. Noise determination turns sampled mechanism outputs into a diagonal
//! Gaussian covariance that is committed by hash, and a two-phase
//! prover/verifier protocol binds later noised queries to that commitment.
//!
//! The numeric core is generic over [`Real`] (`f32` and `f64`); the aliases
//! below fix the double-precision types used by the protocol and CLI.

pub mod bench;
pub mod io;
pub mod mechanisms;
pub mod noise;
pub mod numeric;
pub mod protocol;
pub mod query;

pub use numeric::{Matrix, NumericError, Real, SeededRng, TraceDigest, TraceRecorder, Vector};

pub type Vector64 = numeric::Vector<f64>;
pub type Vector32 = numeric::Vector<f32>;
pub type Matrix64 = numeric::Matrix<f64>;
pub type Matrix32 = numeric::Matrix<f32>;
pub type Dataset64 = mechanisms::Dataset<f64>;
pub type Dataset32 = mechanisms::Dataset<f32>;
pub type DbTable64 = mechanisms::DbTable<f64>;
pub type Formula64 = query::Formula<f64>;
pub type CovarianceMatrix64 = noise::CovarianceMatrix<f64>;
pub type CovarianceMatrix32 = noise::CovarianceMatrix<f32>;
