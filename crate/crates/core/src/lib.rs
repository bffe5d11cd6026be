//! Multi-prototype alignment for individual treatment effect estimation.
//!
//! The library covers the full desk-scale experiment loop:
//!
//! - [`matrix`], [`rng`], [`gradcheck`]: dense float64 arithmetic, seeded
//!   deterministic randomness, and the finite-difference oracle the tests
//!   lean on.
//! - [`dataset`]: the synthetic benchmark generator, CSV ingestion for
//!   external benchmarks, splits, and overlap diagnostics.
//! - [`model`]: representation encoder plus two outcome heads with
//!   hand-derived backpropagation.
//! - [`prototypes`]: per-group learnable prototypes with within-group
//!   matching, cross-group alignment, and diversity regularization.
//! - [`trainer`]: the composed objective, mini-batch training with
//!   assignment refresh, and ITE estimation.
//! - [`metrics`], [`baselines`]: the evaluation suite and the classical
//!   reference estimators.
//! - [`harness`]: config-driven experiment orchestration behind the CLI.

// Index loops mirror the matrix math they implement.
#![allow(clippy::needless_range_loop)]

pub mod activation;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod lap;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod prototypes;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
