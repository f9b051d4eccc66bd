//! Phase-space simulation of exponentially expanded cat-state interferometers.
//!
//! A massive oscillator is split into two coherent branches tagged by a
//! qubit, stretched by alternating harmonic and inverted-harmonic segments,
//! and brought back together. Everything is Gaussian, so the whole protocol
//! reduces to first moments, covariance matrices and symplectic maps.
//!
//! Units are dimensionless throughout: ħ = 1, time in units of 1/ω,
//! positions in units of √2·x0. Only [`interferometer::TrapSetup`] knows
//! about SI values.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dd;
pub mod decoherence;
pub mod gie;
pub mod interferometer;
pub mod linalg;
pub mod phase_space;
pub mod robustness;
pub mod units;

pub use linalg::{CMat, Mat};
pub use num_complex::Complex64;

/// Errors reported by the simulation kernel.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("negative duration {0}")]
    NegativeTime(f64),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("singular matrix")]
    Singular,
    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("empty search range")]
    EmptyRange,
    #[error("zero vector")]
    ZeroVector,
    #[error("bound on `{0}` diverges")]
    Unbounded(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
