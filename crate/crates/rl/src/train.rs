//! Rollout collection, the training loop and policy evaluation.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Env;
use crate::gae::{compute_gae, normalize};
use crate::ppo::{argmax, policy_forward, sample_action, PolicyParams, Ppo, PpoConfig, Sample, UpdateStats};
use crate::RlError;

/// Episodes finished at reset in a row before training gives up.
const MAX_EMPTY_EPISODES: usize = 1000;
/// Window of the running means in [`EpisodeRecord`].
pub const MOVING_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Environment steps taken when the episode ended.
    pub steps: u64,
    pub total_reward: f64,
    /// Reward per step: `total_reward / length`, or the initial reward for
    /// an episode over at reset.
    pub mean_reward: f64,
    pub length: u32,
    pub success: bool,
    /// Running mean of `mean_reward`.
    pub mean_reward_100: f64,
    pub mean_length_100: f64,
}

#[derive(Debug, Clone, Default)]
struct Curve {
    records: Vec<EpisodeRecord>,
    window: VecDeque<(f64, u32)>,
}

impl Curve {
    fn push(&mut self, steps: u64, total_reward: f64, length: u32, success: bool) {
        let mean_reward = if length == 0 {
            total_reward
        } else {
            total_reward / f64::from(length)
        };
        self.window.push_back((mean_reward, length));
        if self.window.len() > MOVING_WINDOW {
            self.window.pop_front();
        }
        let n = self.window.len() as f64;
        self.records.push(EpisodeRecord {
            episode: self.records.len(),
            steps,
            total_reward,
            mean_reward,
            length,
            success,
            mean_reward_100: self.window.iter().map(|w| w.0).sum::<f64>() / n,
            mean_length_100: self.window.iter().map(|w| f64::from(w.1)).sum::<f64>() / n,
        });
    }
}

/// Parameters as they stood at the end of a rollout.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub steps: u64,
    /// Moving-average per-step reward when the snapshot was taken.
    pub mean_reward_100: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: Vec<EpisodeRecord>,
    /// Final parameters.
    pub params: PolicyParams,
    /// Snapshot with the highest moving-average per-step reward, taken before each
    /// update. `None` if no episode finished.
    pub best: Option<Checkpoint>,
    pub updates: Vec<UpdateStats>,
    pub steps: u64,
}

struct Worker<E> {
    env: E,
    obs: Vec<f64>,
    episode_reward: f64,
    episode_length: u32,
}

fn env_err<E: std::error::Error + Send + Sync + 'static>(e: E) -> RlError {
    RlError::Env(Box::new(e))
}

/// Resets until an episode that is not over at reset begins, logging the
/// empty ones.
fn begin_episode<E: Env>(
    w: &mut Worker<E>,
    rng: &mut ChaCha8Rng,
    curve: &mut Curve,
    steps: u64,
) -> Result<(), RlError> {
    for _ in 0..MAX_EMPTY_EPISODES {
        let r = w.env.reset(rng.random()).map_err(env_err)?;
        w.episode_reward = 0.0;
        w.episode_length = 0;
        if r.done {
            curve.push(steps, r.reward, 0, r.success);
            continue;
        }
        w.obs = r.observation;
        return Ok(());
    }
    Err(RlError::DegenerateEnv(MAX_EMPTY_EPISODES))
}

/// Trains from scratch for `total_steps / rollout_horizon` rollouts, one
/// update per rollout. `envs` must hold `config.n_envs` instances, which are
/// stepped in turn.
pub fn train<E: Env>(envs: Vec<E>, config: &PpoConfig, total_steps: u64) -> Result<TrainOutcome, RlError> {
    config.validate()?;
    if envs.len() != config.n_envs {
        return Err(RlError::InvalidConfig(format!(
            "{} environments supplied for n_envs = {}",
            envs.len(),
            config.n_envs
        )));
    }
    let horizon = config.rollout_horizon as u64;
    if total_steps < horizon {
        return Err(RlError::InvalidConfig(format!(
            "budget {total_steps} is smaller than one rollout of {horizon}"
        )));
    }
    let obs_dim = envs[0].observation_dim();
    let n_actions = envs[0].n_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = PolicyParams::init(obs_dim, n_actions, &config.hidden_sizes, &mut rng);
    let mut ppo = Ppo::new(params, config.clone());
    let mut curve = Curve::default();
    let mut steps = 0u64;

    let mut workers: Vec<Worker<E>> = envs
        .into_iter()
        .map(|env| Worker {
            env,
            obs: Vec::new(),
            episode_reward: 0.0,
            episode_length: 0,
        })
        .collect();
    for w in &mut workers {
        begin_episode(w, &mut rng, &mut curve, steps)?;
    }

    let per_env = config.rollout_horizon / config.n_envs;
    let mut updates = Vec::new();
    let mut best: Option<Checkpoint> = None;
    for _ in 0..total_steps / horizon {
        let mut obs_buf = vec![Vec::with_capacity(per_env); workers.len()];
        let mut act_buf = vec![Vec::with_capacity(per_env); workers.len()];
        let mut logp_buf = vec![Vec::with_capacity(per_env); workers.len()];
        let mut val_buf = vec![Vec::with_capacity(per_env); workers.len()];
        let mut rew_buf = vec![Vec::with_capacity(per_env); workers.len()];
        let mut done_buf = vec![Vec::with_capacity(per_env); workers.len()];
        for _ in 0..per_env {
            for (i, w) in workers.iter_mut().enumerate() {
                let (logits, value) = policy_forward(&ppo.params, &w.obs)?;
                let (action, logp) = sample_action(&logits, &mut rng);
                let step = w.env.step(action).map_err(env_err)?;
                steps += 1;
                w.episode_reward += step.reward;
                w.episode_length += 1;
                obs_buf[i].push(std::mem::take(&mut w.obs));
                act_buf[i].push(action);
                logp_buf[i].push(logp);
                val_buf[i].push(value);
                rew_buf[i].push(step.reward);
                done_buf[i].push(step.done);
                if step.done {
                    curve.push(steps, w.episode_reward, w.episode_length, step.success);
                    begin_episode(w, &mut rng, &mut curve, steps)?;
                } else {
                    w.obs = step.observation;
                }
            }
        }

        let mut samples = Vec::with_capacity(config.rollout_horizon);
        let mut raw = Vec::with_capacity(config.rollout_horizon);
        for (i, w) in workers.iter().enumerate() {
            let bootstrap = policy_forward(&ppo.params, &w.obs)?.1;
            let adv = compute_gae(
                &rew_buf[i],
                &val_buf[i],
                &done_buf[i],
                config.gamma,
                config.gae_lambda,
                bootstrap,
            )?;
            raw.extend_from_slice(&adv.raw);
            for t in 0..per_env {
                samples.push(Sample {
                    observation: std::mem::take(&mut obs_buf[i][t]),
                    action: act_buf[i][t],
                    old_log_prob: logp_buf[i][t],
                    advantage: 0.0,
                    ret: adv.returns[t],
                });
            }
        }
        if let Some(last) = curve.records.last() {
            if best.as_ref().is_none_or(|b| last.mean_reward_100 > b.mean_reward_100) {
                best = Some(Checkpoint {
                    params: ppo.params.clone(),
                    steps,
                    mean_reward_100: last.mean_reward_100,
                });
            }
        }
        for (s, a) in samples.iter_mut().zip(normalize(&raw)) {
            s.advantage = a;
        }
        updates.push(ppo.update(&samples, &mut rng)?);
    }

    Ok(TrainOutcome {
        curve: curve.records,
        params: ppo.params,
        best,
        updates,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    /// Mean over episodes of the per-step reward.
    pub mean_reward: f64,
    pub success_rate: f64,
    pub mean_length: f64,
    pub episodes: Vec<EpisodeRecord>,
}

/// Runs `n_episodes` from resets seeded by `seed`, with greedy actions when
/// `deterministic` and sampled ones otherwise. An episode already over at
/// reset counts with length 0 and the initial reward.
pub fn evaluate<E: Env>(
    params: &PolicyParams,
    env: &mut E,
    n_episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<EvalSummary, RlError> {
    assert!(n_episodes >= 1, "at least one episode");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curve = Curve::default();
    let mut steps = 0u64;
    for _ in 0..n_episodes {
        let reset = env.reset(rng.random()).map_err(env_err)?;
        if reset.done {
            curve.push(steps, reset.reward, 0, reset.success);
            continue;
        }
        let mut obs = reset.observation;
        let (mut total, mut length) = (0.0, 0u32);
        loop {
            let (logits, _) = policy_forward(params, &obs)?;
            let action = if deterministic {
                argmax(&logits)
            } else {
                sample_action(&logits, &mut rng).0
            };
            let step = env.step(action).map_err(env_err)?;
            steps += 1;
            total += step.reward;
            length += 1;
            if step.done {
                curve.push(steps, total, length, step.success);
                break;
            }
            obs = step.observation;
        }
    }
    let n = curve.records.len() as f64;
    Ok(EvalSummary {
        mean_reward: curve.records.iter().map(|r| r.mean_reward).sum::<f64>() / n,
        success_rate: curve.records.iter().filter(|r| r.success).count() as f64 / n,
        mean_length: curve.records.iter().map(|r| f64::from(r.length)).sum::<f64>() / n,
        episodes: curve.records,
    })
}
