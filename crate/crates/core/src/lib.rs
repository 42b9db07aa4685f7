//! Behavioral testing for text-based clinical outcome prediction models.
//!
//! The pipeline: load or synthesize notes ([`corpus`]), build one altered
//! copy of the cohort per test group ([`perturb`]), collect model
//! probabilities for every altered note ([`inference`]), compare group means
//! ([`analysis`]) and render tables and figures ([`report`]). The
//! [`pipeline`] module wires the stages to files on disk.

pub mod analysis;
pub mod corpus;
mod error;
pub mod inference;
pub mod par;
pub mod perturb;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result, SampleKey};
pub use par::Execution;
