//! The knob arena as an episodic RL environment.

use softbar_core::arena::{ArenaConfig, ArenaState};
use softbar_core::ledger::UptimeLedger;
use softbar_core::nonstationarity::{step_world, NonstationarityError, Schedule};
use softbar_core::primitives::SweepAction;
use softbar_rl::{Env, Reset, Step};

/// Knob arena under optional parameter drift. The drift clock counts every
/// step taken through this environment, across episodes.
#[derive(Debug, Clone)]
pub struct KnobEnv {
    pub config: ArenaConfig,
    pub schedules: Vec<Schedule>,
    pub ledger: UptimeLedger,
    state: Option<ArenaState>,
    clock: u64,
}

impl KnobEnv {
    pub fn new(config: ArenaConfig) -> Self {
        Self::with_schedules(config, Vec::new())
    }

    pub fn with_schedules(config: ArenaConfig, schedules: Vec<Schedule>) -> Self {
        Self {
            config,
            schedules,
            ledger: UptimeLedger::new(),
            state: None,
            clock: 0,
        }
    }

    pub fn state(&self) -> Option<&ArenaState> {
        self.state.as_ref()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }
}

impl Env for KnobEnv {
    type Error = NonstationarityError;

    fn observation_dim(&self) -> usize {
        self.config.observation_dim()
    }

    fn n_actions(&self) -> usize {
        self.config.n_actions()
    }

    fn reset(&mut self, seed: u64) -> Result<Reset, NonstationarityError> {
        let state = ArenaState::reset(&self.config, seed)?;
        let (done, success) = state.is_done(&self.config);
        let out = Reset {
            observation: state.observe(&self.config),
            done,
            success,
            reward: state.reward(&self.config),
        };
        self.state = Some(state);
        Ok(out)
    }

    fn step(&mut self, action: usize) -> Result<Step, NonstationarityError> {
        let state = self.state.as_mut().expect("reset before step");
        let r = step_world(
            state,
            &self.config,
            &self.schedules,
            SweepAction::from_index(action),
            self.clock,
            &mut self.ledger,
        )?;
        self.clock += 1;
        Ok(Step {
            observation: r.observation,
            reward: r.reward,
            done: r.done,
            success: r.success,
        })
    }
}
