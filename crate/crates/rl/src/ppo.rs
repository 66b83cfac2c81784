//! Categorical actor-critic and the clipped-surrogate update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::mlp::Mlp;
use crate::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rollout_horizon: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub update_epochs: usize,
    pub entropy_coefficient: f64,
    pub value_coefficient: f64,
    pub max_gradient_norm: f64,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    /// Environment instances stepped in turn during collection.
    pub n_envs: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            rollout_horizon: 2048,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            update_epochs: 10,
            entropy_coefficient: 0.0,
            value_coefficient: 0.5,
            max_gradient_norm: 0.5,
            seed: 0,
            hidden_sizes: vec![64, 64],
            n_envs: 1,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: String| Err(RlError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} must lie in (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda {} must lie in [0, 1]", self.gae_lambda));
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.max_gradient_norm > 0.0) {
            return bad("learning_rate and max_gradient_norm must be positive".into());
        }
        if self.batch_size == 0 || self.rollout_horizon == 0 || self.update_epochs == 0 || self.n_envs == 0 {
            return bad("batch_size, rollout_horizon, update_epochs and n_envs must be positive".into());
        }
        if !self.rollout_horizon.is_multiple_of(self.batch_size) {
            return bad(format!(
                "batch_size {} must divide rollout_horizon {}",
                self.batch_size, self.rollout_horizon
            ));
        }
        if !self.rollout_horizon.is_multiple_of(self.n_envs) {
            return bad(format!(
                "n_envs {} must divide rollout_horizon {}",
                self.n_envs, self.rollout_horizon
            ));
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        if !(self.entropy_coefficient.is_finite() && self.value_coefficient.is_finite()) {
            return bad("loss coefficients must be finite".into());
        }
        Ok(())
    }
}

/// Separate policy (logits) and value networks.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

fn layer_sizes(obs_dim: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut s = vec![obs_dim];
    s.extend_from_slice(hidden);
    s.push(out);
    s
}

impl PolicyParams {
    pub fn zeros(obs_dim: usize, n_actions: usize, hidden: &[usize]) -> Self {
        Self {
            actor: Mlp::zeros(&layer_sizes(obs_dim, hidden, n_actions)),
            critic: Mlp::zeros(&layer_sizes(obs_dim, hidden, 1)),
        }
    }

    /// Orthogonal initialization with gains √2 (hidden), 0.01 (logits) and
    /// 1 (value).
    pub fn init<R: Rng>(obs_dim: usize, n_actions: usize, hidden: &[usize], rng: &mut R) -> Self {
        let g = std::f64::consts::SQRT_2;
        Self {
            actor: Mlp::orthogonal(&layer_sizes(obs_dim, hidden, n_actions), g, 0.01, rng),
            critic: Mlp::orthogonal(&layer_sizes(obs_dim, hidden, 1), g, 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn n_params(&self) -> usize {
        self.actor.params().len() + self.critic.params().len()
    }

    /// Actor parameters followed by critic parameters.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.actor.params().to_vec();
        v.extend_from_slice(self.critic.params());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let na = self.actor.params().len();
        self.actor.params_mut().copy_from_slice(&flat[..na]);
        self.critic.params_mut().copy_from_slice(&flat[na..]);
    }

    pub fn is_finite(&self) -> bool {
        self.actor
            .params()
            .iter()
            .chain(self.critic.params())
            .all(|v| v.is_finite())
    }
}

/// Logits and value for one observation.
pub fn policy_forward(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, f64), RlError> {
    if obs.len() != params.obs_dim() {
        return Err(RlError::DimensionMismatch {
            expected: params.obs_dim(),
            found: obs.len(),
        });
    }
    Ok((params.actor.forward(obs), params.critic.forward(obs)[0]))
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| (z - max) - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Draws from the softmax distribution; returns `(action, log-probability)`.
pub fn sample_action<R: Rng>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = logp.len() - 1;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            chosen = i;
            break;
        }
    }
    (chosen, logp[chosen])
}

/// Index of the largest logit, first on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, z) in logits.iter().enumerate() {
        if *z > logits[best] {
            best = i;
        }
    }
    best
}

/// One training sample of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss hyperparameters used by [`minibatch_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub clip_epsilon: f64,
    pub value_coefficient: f64,
    pub entropy_coefficient: f64,
}

impl From<&PpoConfig> for LossWeights {
    fn from(c: &PpoConfig) -> Self {
        Self {
            clip_epsilon: c.clip_epsilon,
            value_coefficient: c.value_coefficient,
            entropy_coefficient: c.entropy_coefficient,
        }
    }
}

/// Mean loss over `batch` and its gradient (actor then critic parameters).
///
/// `L = −E[min(ρA, clip(ρ, 1 ± ε)A)] + c_v·E[(V − R)²] − c_e·E[H]`.
pub fn minibatch_loss(params: &PolicyParams, batch: &[Sample], w: LossWeights) -> (LossStats, Vec<f64>) {
    let n = batch.len() as f64;
    let na = params.actor.params().len();
    let mut grad = vec![0.0; params.n_params()];
    let mut stats = LossStats::default();
    for s in batch {
        let actor_cache = params.actor.forward_cached(&s.observation);
        let logits = actor_cache.output();
        let logp = log_softmax(logits);
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -p.iter().zip(&logp).map(|(pi, li)| pi * li).sum::<f64>();

        let log_ratio = logp[s.action] - s.old_log_prob;
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - w.clip_epsilon, 1.0 + w.clip_epsilon);
        let a = s.advantage;
        let unclipped_term = ratio * a;
        let clipped_term = clipped * a;
        let surrogate = unclipped_term.min(clipped_term);
        // the unclipped branch carries the gradient when it is the minimum
        let d_surr_d_ratio = if unclipped_term <= clipped_term { a } else { 0.0 };

        let cache_v = params.critic.forward_cached(&s.observation);
        let v = cache_v.output()[0];
        let verr = v - s.ret;

        stats.policy -= surrogate / n;
        stats.value += verr * verr / n;
        stats.entropy += entropy / n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / n;
        if (ratio - 1.0).abs() > w.clip_epsilon {
            stats.clip_fraction += 1.0 / n;
        }

        let d_logp = -d_surr_d_ratio * ratio / n;
        let mut g_logits: Vec<f64> = (0..p.len())
            .map(|j| d_logp * (f64::from(u8::from(j == s.action)) - p[j]))
            .collect();
        if w.entropy_coefficient != 0.0 {
            for j in 0..p.len() {
                // ∂H/∂z_j = −p_j (log p_j + H)
                g_logits[j] += w.entropy_coefficient / n * p[j] * (logp[j] + entropy);
            }
        }
        params.actor.backward(&actor_cache, &g_logits, &mut grad[..na]);
        let g_v = w.value_coefficient * 2.0 * verr / n;
        params.critic.backward(&cache_v, &[g_v], &mut grad[na..]);
    }
    stats.total = stats.policy + w.value_coefficient * stats.value - w.entropy_coefficient * stats.entropy;
    (stats, grad)
}

/// Loss value alone, for finite-difference checks.
pub fn minibatch_loss_value(params: &PolicyParams, batch: &[Sample], w: LossWeights) -> f64 {
    minibatch_loss(params, batch, w).0.total
}

/// Euclidean norm of `grad`, rescaled in place to at most `max_norm`.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// Averages of [`LossStats`] over all minibatches of an update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub gradient_norm: f64,
    pub minibatches: usize,
}

/// Learner state: parameters plus optimizer moments.
#[derive(Debug, Clone)]
pub struct Ppo {
    pub params: PolicyParams,
    pub optimizer: Adam,
    pub config: PpoConfig,
}

impl Ppo {
    pub fn new(params: PolicyParams, config: PpoConfig) -> Self {
        let optimizer = Adam::new(params.n_params(), config.learning_rate);
        Self {
            params,
            optimizer,
            config,
        }
    }

    /// `update_epochs` passes over shuffled minibatches of `samples`.
    pub fn update<R: Rng>(&mut self, samples: &[Sample], rng: &mut R) -> Result<UpdateStats, RlError> {
        let b = self.config.batch_size;
        if samples.is_empty() || !samples.len().is_multiple_of(b) {
            return Err(RlError::InvalidConfig(format!(
                "rollout of {} samples is not a multiple of batch_size {b}",
                samples.len()
            )));
        }
        let w = LossWeights::from(&self.config);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut acc = UpdateStats::default();
        let mut flat = self.params.flat();
        for _ in 0..self.config.update_epochs {
            order.shuffle(rng);
            for chunk in order.chunks(b) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let (stats, mut grad) = minibatch_loss(&self.params, &batch, w);
                if !stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(RlError::NonFiniteLoss);
                }
                let norm = clip_gradient(&mut grad, self.config.max_gradient_norm);
                self.optimizer.step(&mut flat, &grad);
                self.params.set_flat(&flat);
                acc.loss.total += stats.total;
                acc.loss.policy += stats.policy;
                acc.loss.value += stats.value;
                acc.loss.entropy += stats.entropy;
                acc.loss.approx_kl += stats.approx_kl;
                acc.loss.clip_fraction += stats.clip_fraction;
                acc.gradient_norm += norm;
                acc.minibatches += 1;
            }
        }
        let m = acc.minibatches as f64;
        acc.loss.total /= m;
        acc.loss.policy /= m;
        acc.loss.value /= m;
        acc.loss.entropy /= m;
        acc.loss.approx_kl /= m;
        acc.loss.clip_fraction /= m;
        acc.gradient_norm /= m;
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_is_valid() {
        PpoConfig::default().validate().unwrap();
        let c = PpoConfig {
            batch_size: 100,
            ..PpoConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn argmax_prefers_first_tie() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn dimension_mismatch() {
        let p = PolicyParams::zeros(3, 2, &[4]);
        assert!(matches!(
            policy_forward(&p, &[0.0; 2]),
            Err(RlError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn gradient_clip_caps_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_gradient(&mut g, 1.0), 5.0);
        let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sampled_log_prob_matches_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = [0.3, -1.2, 2.0];
        let p = softmax(&logits);
        for _ in 0..100 {
            let (a, lp) = sample_action(&logits, &mut rng);
            assert!((lp.exp() - p[a]).abs() < 1e-12);
        }
    }
}
