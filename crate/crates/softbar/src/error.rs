//! Harness errors.

use std::path::Path;

use softbar_core::arena::ArenaError;
use softbar_core::nonstationarity::NonstationarityError;
use softbar_rl::policy_file::PolicyFileError;
use softbar_rl::RlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("output directory {0} is locked by another run")]
    Locked(String),
    #[error("policy file {path}: {source}")]
    Policy {
        path: String,
        #[source]
        source: PolicyFileError,
    },
    #[error("policy does not fit the arena: {0}")]
    PolicyShape(String),
    #[error("training: {0}")]
    Train(#[from] RlError),
    #[error("simulation: {0}")]
    Sim(#[from] NonstationarityError),
    #[error("arena: {0}")]
    Arena(#[from] ArenaError),
    #[error("invariant `{invariant}` violated at step {step}: {detail}")]
    Invariant {
        step: u64,
        invariant: &'static str,
        detail: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// The message and its source chain on one line.
    pub fn one_line(&self) -> String {
        let mut msg = self.to_string();
        let mut source = std::error::Error::source(self);
        while let Some(s) = source {
            let text = s.to_string();
            if !msg.contains(&text) {
                msg.push_str(": ");
                msg.push_str(&text);
            }
            source = s.source();
        }
        msg.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}
