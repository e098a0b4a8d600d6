//! Adaptation space reduction for MAPE-K feedback loops.
//!
//! Online linear learners predict which adaptation options are likely to
//! satisfy the adaptation goals, so that only a small subset of the space
//! has to be verified every cycle.
//!
//! The crate is organised along the runtime pipeline:
//!
//! - [`domain`] and [`goals`]: adaptation options, quality vectors and goal predicates.
//! - [`features`] and [`importance`]: feature composition, selection and scaling.
//! - [`learners`]: online classifiers/regressors and design-stage model evaluation.
//! - [`reducer`]: prediction, filtering, exploration and online ingestion.
//! - [`verifier`]: the verification contract with simulated cost and noise.
//! - [`mape`]: the feedback loop and the planner.
//! - [`metrics`]: learning metrics, benchmark metrics and the Wilcoxon test.

pub mod domain;
pub mod error;
pub mod features;
pub mod goals;
pub mod importance;
pub mod learners;
pub mod mape;
pub mod metrics;
pub mod reducer;
pub mod seed;
pub mod verifier;

pub use error::{Error, Result};
