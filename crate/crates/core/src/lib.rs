//! Desk-scale laboratory for class-imbalanced semi-supervised learning.
//!
//! The crate builds everything from first principles on top of a small dense
//! [`Matrix`] type: synthetic long-tailed tasks, FixMatch/ReMixMatch-style
//! trainers, probe-based bias measurement with pseudo-label and test-time
//! refinement, and a Bayes-oracle evaluation bed.
//!
//! Numeric code is generic over the scalar ([`scalar::Real`], implemented for
//! `f32`/`f64`); the experiment layers use the concrete [`Mat`] alias.

pub mod error;
pub mod scalar;

pub mod matrix;
pub mod nn;

pub mod data;

pub mod ssl;

pub mod cdmad;

pub mod eval;

pub mod harness;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Default matrix type used by the experiment layers.
pub type Mat = Matrix<f64>;
/// Single-precision variant for memory-constrained experiments.
pub type Mat32 = Matrix<f32>;
