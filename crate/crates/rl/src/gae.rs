//! Generalized advantage estimation.

use crate::RlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    /// Before normalization.
    pub raw: Vec<f64>,
    /// Zero mean, unit variance over the rollout.
    pub normalized: Vec<f64>,
    /// `raw + values`, the value-function targets.
    pub returns: Vec<f64>,
}

/// Backward recursion `A_t = δ_t + γλ(1 − d_t)A_{t+1}` with
/// `δ_t = r_t + γ(1 − d_t)V_{t+1} − V_t`; `bootstrap_value` stands in for
/// `V_T` after the last transition.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
    bootstrap_value: f64,
) -> Result<Advantages, RlError> {
    let n = rewards.len();
    if n == 0 {
        return Err(RlError::EmptyTrajectory);
    }
    assert!(
        values.len() == n && dones.len() == n,
        "trajectory arrays differ in length"
    );
    let mut raw = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        raw[t] = next_adv;
        next_value = values[t];
    }
    let returns = raw.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Advantages {
        normalized: normalize(&raw),
        raw,
        returns,
    })
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    x.iter().map(|v| (v - mean) / sd).collect()
}
