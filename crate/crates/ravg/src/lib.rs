//! Streaming linear learning on running-average sufficient statistics.
//!
//! The library maintains constant-memory running averages of an observation
//! stream ([`moments::MomentSet`]), standardizes them in moment space
//! ([`standardize`]), and extracts sparse linear models of any requested
//! sparsity from the averages alone ([`extract`]): dense least squares,
//! least squares with hard thresholding, feature selection with annealing,
//! and lasso / elastic net / MCP via thresholded gradient descent. Because
//! the averages are sufficient statistics for penalized least squares, every
//! extraction is equivalent to running the same procedure offline over the
//! full data.
//!
//! Exponential forgetting in the moment updates lets extracted models track
//! drifting coefficients; [`eval`] adds the metrics, the sequential regret
//! harness, recovery-bound calculators and the drift experiment, and
//! [`experiments`] packages the reproducible benchmark protocols behind
//! seed-parallel runners.

pub mod error;
pub mod mat;
pub mod rng;

pub mod moments;
pub mod snapshot;
pub mod standardize;

pub mod linsolve;
pub mod model;

pub mod extract;

pub mod simgen;

pub mod eval;
pub mod experiments;

pub use error::{Error, Result};
pub use model::SparseModel;
pub use moments::{MomentSet, Observation, WeightMode};
pub use standardize::{standardize, StandardizedMoments};
