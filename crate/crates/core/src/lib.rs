//! Source-free domain adaptation by step-wise, confidence-driven expansion
//! of a pseudo-labeled target subset.
//!
//! The numeric code is generic over [`Scalar`] (`f32`, `f64`). The aliases
//! below fix the scalar to `f64`, which is what the experiment tooling uses.

pub mod criteria;
pub mod data;
pub mod diagnostics;
pub mod engine;
mod error;
pub mod matrix;
pub mod metrics;
pub mod nn;
mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::{clamped_ln, Scalar, LOG_CLIP};

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type Network64 = nn::NetworkParams<f64>;
pub type Network32 = nn::NetworkParams<f32>;
pub type SampleSet64 = data::SampleSet<f64>;
pub type SampleSet32 = data::SampleSet<f32>;
pub type State64 = engine::AdaptationState<f64>;
pub type StageRecord64 = diagnostics::StageRecord<f64>;
