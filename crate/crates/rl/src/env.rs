//! Environment interface and a one-step sanity environment.

use std::convert::Infallible;

/// Outcome of [`Env::reset`]. An episode can already be over at reset, in
/// which case `reward` is the reward of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Reset {
    pub observation: Vec<f64>,
    pub done: bool,
    pub success: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Episodic environment with discrete actions.
pub trait Env {
    type Error: std::error::Error + Send + Sync + 'static;

    fn observation_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Reset, Self::Error>;
    fn step(&mut self, action: usize) -> Result<Step, Self::Error>;
}

/// One-step episodes paying 1 for action 0 and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BanditEnv {
    pub n_actions: usize,
}

impl Env for BanditEnv {
    type Error = Infallible;

    fn observation_dim(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn reset(&mut self, _seed: u64) -> Result<Reset, Infallible> {
        Ok(Reset {
            observation: vec![1.0],
            done: false,
            success: false,
            reward: 0.0,
        })
    }

    fn step(&mut self, action: usize) -> Result<Step, Infallible> {
        let hit = action == 0;
        Ok(Step {
            observation: vec![1.0],
            reward: if hit { 1.0 } else { 0.0 },
            done: true,
            success: hit,
        })
    }
}
