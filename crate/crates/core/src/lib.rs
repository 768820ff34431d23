//! Score-level multibiometric fusion workbench.
//!
//! Per-modality match scores are normalized with a genuine-statistics tanh
//! estimator, then fused either by classical rules (sum, min, product, a
//! GA-tuned weighted sum) or by a fusion function evolved with genetic
//! programming whose fitness is the equal error rate of the fused scores.

pub mod baselines;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod normalization;

pub use error::{Error, Result};
