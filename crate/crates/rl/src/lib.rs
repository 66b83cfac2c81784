//! Proximal policy optimization for discrete-action episodic environments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod env;
pub mod gae;
pub mod mlp;
pub mod policy_file;
pub mod ppo;
pub mod train;

use thiserror::Error;

pub use env::{BanditEnv, Env, Reset, Step};
pub use ppo::{PolicyParams, PpoConfig};
pub use train::{evaluate, train, Checkpoint, EpisodeRecord, EvalSummary, TrainOutcome};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("observation has {found} entries, the network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite loss or gradient during the update")]
    NonFiniteLoss,
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error("environment finished {0} episodes in a row at reset")]
    DegenerateEnv(usize),
    #[error("environment error: {0}")]
    Env(#[source] Box<dyn std::error::Error + Send + Sync>),
}
