//! Causal uplift learning on randomized-trial data.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: trial datasets, CSV ingestion, synthetic generators, label-bias
//!   injection, splitting and cluster-ID featureization.
//! - [`regress`]: bagged regression forests and a constant predictor behind a
//!   single [`regress::Regressor`] contract.
//! - [`learners`]: S-, T- and X-learner baselines.
//! - [`drl`]: the cross-fitted doubly robust learner with a known propensity.
//! - [`policy`]: greedy knapsack allocation, Lagrangian scoring and score
//!   clustering.
//! - [`eval`]: uplift/cost curves, AUUC/AUCC and ground-truth error metrics.

pub mod data;
pub mod drl;
pub mod error;
pub mod eval;
pub mod learners;
pub mod matrix;
pub mod policy;
pub mod regress;
pub mod rng;

pub use error::{Result, UpliftError};
pub use matrix::Matrix;
