//! Experiment harness around the knob-turning simulator: configuration,
//! training, transfer evaluation, rollouts and long-run drift simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod error;
pub mod experiments;
pub mod invariants;
pub mod output;
pub mod protocol;

pub use config::ExperimentConfig;
pub use error::HarnessError;
