//! Statistical estimation pipeline for a cluster randomized HIV trial:
//! endpoint classification, two-stage and single-stage TMLE with adaptive
//! covariate pre-specification, influence-curve inference, Kaplan-Meier
//! horizon effects, cluster-trial power calculations, and a Monte Carlo
//! harness for validating estimator operating characteristics on synthetic
//! trials.

pub mod data;
pub mod error;
pub mod inference;
pub mod learners;
pub mod table;

pub use error::{Error, Result};
