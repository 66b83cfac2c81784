//! The four experiment commands. Each writes its artifacts into an output
//! directory it holds locked while running.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use softbar_core::arena::{ArenaConfig, ArenaState};
use softbar_core::ledger::{UptimeLedger, SECONDS_PER_PRIMITIVE};
use softbar_core::nonstationarity::{dynamics_at, step_world, Schedule};
use softbar_core::primitives::SweepAction;
use softbar_rl::policy_file;
use softbar_rl::ppo::{argmax, policy_forward};
use softbar_rl::{evaluate, train, EvalSummary, PolicyParams, PpoConfig, TrainOutcome};
use tracing::{debug, info, warn};

use crate::config::ExperimentConfig;
use crate::env::KnobEnv;
use crate::error::HarnessError;
use crate::invariants::check_step;
use crate::output::OutputDir;
use crate::protocol::{boundaries, cooldown_per_boundary, downtime_for, scaled_segments};

pub const POLICY_FILE: &str = "policy.sbpp";
pub const BEST_POLICY_FILE: &str = "policy_best.sbpp";
pub const CURVE_FILE: &str = "learning_curve.csv";
pub const LEDGER_FILE: &str = "ledger.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const MATRIX_FILE: &str = "transfer_matrix.csv";
pub const TRIALS_FILE: &str = "transfer_trials.csv";
pub const ROLLOUT_FILE: &str = "rollout.csv";
pub const DRIFT_FILE: &str = "drift_trace.csv";

/// Added to the run seed to seed evaluation episodes.
pub const EVAL_SEED_OFFSET: u64 = 1_000_003;

/// Trains on `arena` with `config.n_envs` collectors.
pub fn train_policy(
    arena: &ArenaConfig,
    schedules: &[Schedule],
    config: &PpoConfig,
    total_steps: u64,
) -> Result<TrainOutcome, HarnessError> {
    let envs = (0..config.n_envs)
        .map(|_| KnobEnv::with_schedules(arena.clone(), schedules.to_vec()))
        .collect();
    Ok(train(envs, config, total_steps)?)
}

/// The best snapshot if training kept one, else the final parameters.
pub fn chosen_policy(outcome: &TrainOutcome) -> &PolicyParams {
    outcome.best.as_ref().map_or(&outcome.params, |b| &b.params)
}

#[derive(Debug, Serialize)]
struct CurveRow {
    episode: usize,
    steps: u64,
    total_reward: f64,
    length: u32,
    wallclock_equiv_s: f64,
}

fn write_curve(out: &OutputDir, name: &str, outcome: &TrainOutcome) -> Result<(), HarnessError> {
    let mut w = out.csv(name)?;
    for r in &outcome.curve {
        w.serialize(CurveRow {
            episode: r.episode,
            steps: r.steps,
            total_reward: r.total_reward,
            length: r.length,
            wallclock_equiv_s: r.steps as f64 * SECONDS_PER_PRIMITIVE,
        })?;
    }
    if outcome.curve.is_empty() {
        w.write_record(["episode", "steps", "total_reward", "length", "wallclock_equiv_s"])?;
    }
    w.flush().map_err(|e| HarnessError::io(&out.file(name), e))?;
    Ok(())
}

fn save_policy(out: &OutputDir, name: &str, params: &PolicyParams) -> Result<(), HarnessError> {
    let path = out.file(name);
    policy_file::save(params, &path).map_err(|source| HarnessError::Policy {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a policy and checks it fits `arena`.
pub fn load_policy(path: &Path, arena: &ArenaConfig) -> Result<PolicyParams, HarnessError> {
    let params = policy_file::load(path).map_err(|source| HarnessError::Policy {
        path: path.display().to_string(),
        source,
    })?;
    if params.obs_dim() != arena.observation_dim() || params.n_actions() != arena.n_actions() {
        return Err(HarnessError::PolicyShape(format!(
            "policy maps {} inputs to {} actions, arena has {} and {}",
            params.obs_dim(),
            params.n_actions(),
            arena.observation_dim(),
            arena.n_actions()
        )));
    }
    Ok(params)
}

#[derive(Debug)]
pub struct TrainReport {
    pub outcome: TrainOutcome,
    pub ledger: UptimeLedger,
}

/// `train`: policy files, learning curve, ledger and the resolved config.
pub fn run_train(config: &ExperimentConfig, out_dir: &Path) -> Result<TrainReport, HarnessError> {
    let arena = config.arena()?;
    let out = OutputDir::acquire(out_dir)?;
    info!(steps = config.run.total_steps, seed = config.run.seed, "training");
    let outcome = train_policy(&arena, &config.nonstationarity, &config.ppo(), config.run.total_steps)?;
    let mut ledger = UptimeLedger::new();
    ledger.record_steps(outcome.steps);
    ledger.record_downtime(downtime_for(
        outcome.steps,
        &config.run.segments,
        config.run.cooldown_seconds(),
    ));
    save_policy(&out, POLICY_FILE, &outcome.params)?;
    save_policy(&out, BEST_POLICY_FILE, chosen_policy(&outcome))?;
    write_curve(&out, CURVE_FILE, &outcome)?;
    out.write_json(LEDGER_FILE, &ledger)?;
    out.write_text(CONFIG_FILE, &config.to_toml()?)?;
    info!(
        episodes = outcome.curve.len(),
        uptime = ledger.uptime_fraction(),
        "training finished"
    );
    Ok(TrainReport { outcome, ledger })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCell {
    pub train_material: String,
    pub test_material: String,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub mean_length: f64,
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    train_material: &'a str,
    test_material: &'a str,
    trial: usize,
    total_reward: f64,
    length: u32,
    success: bool,
}

#[derive(Debug)]
pub struct TransferReport {
    /// Row-major: `cells[i * n + j]` trained on `i`, tested on `j`.
    pub cells: Vec<TransferCell>,
    pub evaluations: Vec<EvalSummary>,
}

impl TransferReport {
    pub fn cell(&self, train: &str, test: &str) -> Option<&TransferCell> {
        self.cells
            .iter()
            .find(|c| c.train_material == train && c.test_material == test)
    }
}

/// `transfer`: trains one policy per material with the same seed and
/// evaluates every policy greedily on every material.
pub fn run_transfer(
    config: &ExperimentConfig,
    materials: &[String],
    trials: usize,
    out_dir: &Path,
) -> Result<TransferReport, HarnessError> {
    if materials.len() != 2 {
        return Err(HarnessError::Config(format!(
            "transfer needs exactly 2 materials, got {}",
            materials.len()
        )));
    }
    if trials == 0 {
        return Err(HarnessError::Config("trials must be positive".into()));
    }
    let arenas = materials
        .iter()
        .map(|m| config.arena_with_material(m))
        .collect::<Result<Vec<_>, _>>()?;
    for a in &arenas {
        a.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let out = OutputDir::acquire(out_dir)?;
    let mut ledger = UptimeLedger::new();
    let mut policies = Vec::new();
    for (name, arena) in materials.iter().zip(&arenas) {
        info!(material = %name, "training");
        let outcome = train_policy(arena, &config.nonstationarity, &config.ppo(), config.run.total_steps)?;
        ledger.record_steps(outcome.steps);
        save_policy(&out, &format!("policy_{name}.sbpp"), chosen_policy(&outcome))?;
        write_curve(&out, &format!("learning_curve_{name}.csv"), &outcome)?;
        policies.push(chosen_policy(&outcome).clone());
    }

    let eval_seed = config.run.seed.wrapping_add(EVAL_SEED_OFFSET);
    let mut cells = Vec::new();
    let mut evaluations = Vec::new();
    let mut trials_csv = out.csv(TRIALS_FILE)?;
    for (train_name, params) in materials.iter().zip(&policies) {
        for (test_name, arena) in materials.iter().zip(&arenas) {
            let mut env = KnobEnv::with_schedules(arena.clone(), config.nonstationarity.clone());
            let summary = evaluate(params, &mut env, trials, true, eval_seed)?;
            ledger.record_steps(env.ledger.active_steps);
            for (trial, r) in summary.episodes.iter().enumerate() {
                trials_csv.serialize(TrialRow {
                    train_material: train_name,
                    test_material: test_name,
                    trial,
                    total_reward: r.total_reward,
                    length: r.length,
                    success: r.success,
                })?;
            }
            cells.push(TransferCell {
                train_material: train_name.clone(),
                test_material: test_name.clone(),
                mean_reward: summary.mean_reward,
                success_rate: summary.success_rate,
                mean_length: summary.mean_length,
            });
            evaluations.push(summary);
        }
    }
    trials_csv
        .flush()
        .map_err(|e| HarnessError::io(&out.file(TRIALS_FILE), e))?;
    let mut matrix = out.csv(MATRIX_FILE)?;
    for c in &cells {
        matrix.serialize(c)?;
    }
    matrix
        .flush()
        .map_err(|e| HarnessError::io(&out.file(MATRIX_FILE), e))?;
    out.write_json(LEDGER_FILE, &ledger)?;
    out.write_text(CONFIG_FILE, &config.to_toml()?)?;
    Ok(TransferReport { cells, evaluations })
}

/// Chooses actions greedily from a policy or uniformly at random.
enum Actor {
    Greedy(PolicyParams),
    Random,
}

impl Actor {
    fn act(&self, obs: &[f64], n_actions: usize, rng: &mut ChaCha8Rng) -> Result<usize, HarnessError> {
        match self {
            Actor::Greedy(p) => Ok(argmax(&policy_forward(p, obs)?.0)),
            Actor::Random => Ok(rng.random_range(0..n_actions)),
        }
    }
}

fn actor_for(policy: Option<&Path>, arena: &ArenaConfig) -> Result<Actor, HarnessError> {
    Ok(match policy {
        Some(p) => Actor::Greedy(load_policy(p, arena)?),
        None => Actor::Random,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSummary {
    pub episodes: usize,
    pub rows: usize,
    pub successes: usize,
}

fn rollout_row(
    episode: usize,
    step: u32,
    action: Option<usize>,
    state: &ArenaState,
    reward: f64,
    arena: &ArenaConfig,
) -> Vec<String> {
    let mut row = vec![
        episode.to_string(),
        step.to_string(),
        action.map_or_else(String::new, |a| a.to_string()),
        state.knob_angle.to_string(),
        reward.to_string(),
    ];
    for i in 0..arena.n_modules() {
        let p = state.world_tip(arena, i);
        row.push(p.x.to_string());
        row.push(p.y.to_string());
    }
    row
}

/// `rollout`: per-step CSV of greedy (with `policy`) or uniformly random
/// episodes. Row `step = 0` is the reset state with an empty action.
pub fn run_rollout(
    config: &ExperimentConfig,
    policy: Option<&Path>,
    episodes: usize,
    out_dir: &Path,
) -> Result<RolloutSummary, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let arena = config.arena()?;
    let actor = actor_for(policy, &arena)?;
    let out = OutputDir::acquire(out_dir)?;
    let mut header: Vec<String> = ["episode", "step", "action", "knob_angle", "reward"]
        .map(String::from)
        .to_vec();
    for i in 0..arena.n_modules() {
        header.push(format!("tip{i}_x"));
        header.push(format!("tip{i}_y"));
    }
    let mut w = out.csv(ROLLOUT_FILE)?;
    w.write_record(&header)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut ledger = UptimeLedger::new();
    let mut summary = RolloutSummary {
        episodes,
        rows: 0,
        successes: 0,
    };
    let mut clock = 0u64;
    for episode in 0..episodes {
        let mut state = ArenaState::reset(&arena, rng.random())?;
        w.write_record(rollout_row(episode, 0, None, &state, state.reward(&arena), &arena))?;
        summary.rows += 1;
        let (mut done, mut success) = state.is_done(&arena);
        while !done {
            let action = actor.act(&state.observe(&arena), arena.n_actions(), &mut rng)?;
            let r = step_world(
                &mut state,
                &arena,
                &config.nonstationarity,
                SweepAction::from_index(action),
                clock,
                &mut ledger,
            )?;
            clock += 1;
            w.write_record(rollout_row(
                episode,
                state.step_count,
                Some(action),
                &state,
                r.reward,
                &arena,
            ))?;
            summary.rows += 1;
            (done, success) = (r.done, r.success);
        }
        summary.successes += usize::from(success);
        debug!(episode, steps = state.step_count, success, "episode finished");
    }
    w.flush().map_err(|e| HarnessError::io(&out.file(ROLLOUT_FILE), e))?;
    out.write_json(LEDGER_FILE, &ledger)?;
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct LongrunOptions {
    /// Divides every segment length and the cooldown.
    pub scale: u64,
    /// Count steps and downtime without simulating.
    pub dry_run: bool,
    pub policy: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DriftRow<'a> {
    step: u64,
    parameter_path: &'a str,
    multiplier: f64,
}

/// `longrun`: the segmented protocol under scheduled drift with invariant
/// checks after every step. Schedule and failure steps count steps of the
/// (scaled) run.
pub fn run_longrun(
    config: &ExperimentConfig,
    options: &LongrunOptions,
    out_dir: &Path,
) -> Result<UptimeLedger, HarnessError> {
    if options.scale == 0 {
        return Err(HarnessError::Config("scale must be at least 1".into()));
    }
    let arena = config.arena()?;
    let actor = if options.dry_run {
        Actor::Random
    } else {
        actor_for(options.policy.as_deref(), &arena)?
    };
    let out = OutputDir::acquire(out_dir)?;
    let segments = scaled_segments(&config.run.segments, options.scale);
    let total: u64 = segments.iter().sum();
    let cooldown = cooldown_per_boundary(config.run.cooldown_seconds() / options.scale as f64, &segments);
    let cuts = boundaries(&segments);
    info!(total, scale = options.scale, dry_run = options.dry_run, "long run");

    let mut ledger = UptimeLedger::new();
    let mut drift = out.csv(DRIFT_FILE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut state: Option<ArenaState> = None;
    let result = (|| {
        for t in 0..total {
            if cuts.contains(&t) {
                ledger.record_downtime(cooldown);
            }
            for f in config.run.failures.iter().filter(|f| f.step == t) {
                warn!(step = t, "{}", f.description);
                ledger.record_failure(t, f.description.clone());
                ledger.record_downtime(f.downtime_seconds);
                state = None;
            }
            let psi = dynamics_at(&config.nonstationarity, t);
            if psi.is_empty() {
                drift.serialize(DriftRow {
                    step: t,
                    parameter_path: "none",
                    multiplier: 1.0,
                })?;
            }
            for (path, m) in &psi {
                drift.serialize(DriftRow {
                    step: t,
                    parameter_path: path,
                    multiplier: *m,
                })?;
            }
            if options.dry_run {
                ledger.record_primitive();
                continue;
            }
            let s = match state.as_mut() {
                Some(s) => s,
                None => state.insert(ArenaState::reset(&arena, rng.random())?),
            };
            let action = actor.act(&s.observe(&arena), arena.n_actions(), &mut rng)?;
            let step = step_world(
                s,
                &arena,
                &config.nonstationarity,
                SweepAction::from_index(action),
                t,
                &mut ledger,
            )
            .map_err(|e| HarnessError::Invariant {
                step: t,
                invariant: "solver_convergence",
                detail: e.to_string(),
            })?;
            check_step(&arena, s, &step).map_err(|v| HarnessError::Invariant {
                step: t,
                invariant: v.invariant,
                detail: v.detail,
            })?;
            if step.done {
                state = None;
            }
        }
        Ok(())
    })();
    drift.flush().map_err(|e| HarnessError::io(&out.file(DRIFT_FILE), e))?;
    if let Err(HarnessError::Invariant {
        step,
        invariant,
        detail,
    }) = &result
    {
        ledger.record_failure(*step, format!("{invariant}: {detail}"));
    }
    out.write_json(LEDGER_FILE, &ledger)?;
    result.map(|()| ledger)
}
