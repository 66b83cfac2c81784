use proptest::prelude::*;
use softbar_rl::gae::{compute_gae, normalize};
use softbar_rl::RlError;

/// Sum of discounted TD errors, truncated at episode ends.
fn lambda_return_oracle(r: &[f64], v: &[f64], d: &[bool], gamma: f64, lambda: f64, boot: f64) -> Vec<f64> {
    let n = r.len();
    let value_after = |t: usize| if t + 1 < n { v[t + 1] } else { boot };
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + if d[t] { 0.0 } else { gamma * value_after(t) } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..n {
                sum += w * delta[k];
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Discounted return to the episode end, bootstrapped past the horizon.
fn monte_carlo_oracle(r: &[f64], d: &[bool], gamma: f64, boot: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut g = 0.0;
            let mut w = 1.0;
            let mut k = t;
            loop {
                g += w * r[k];
                if d[k] {
                    break;
                }
                w *= gamma;
                k += 1;
                if k == n {
                    g += w * boot;
                    break;
                }
            }
            g
        })
        .collect()
}

fn trajectory() -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let r = vec![1.0, -0.5, 2.0, 0.0, 3.0, -1.0, 0.25, 4.0];
    let v = vec![0.3, 0.1, -0.2, 0.8, 1.5, 0.0, -0.7, 2.2];
    let d = vec![false, false, true, false, false, true, false, false];
    (r, v, d)
}

#[test]
fn matches_the_truncated_lambda_sum() {
    let (r, v, d) = trajectory();
    for (gamma, lambda) in [(0.99, 0.95), (0.9, 0.5), (1.0, 1.0), (0.5, 0.0)] {
        let out = compute_gae(&r, &v, &d, gamma, lambda, 0.6).unwrap();
        let want = lambda_return_oracle(&r, &v, &d, gamma, lambda, 0.6);
        for (a, b) in out.raw.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "γ={gamma} λ={lambda}: {a} vs {b}");
        }
        for ((ret, a), val) in out.returns.iter().zip(&out.raw).zip(&v) {
            assert!((ret - (a + val)).abs() < 1e-15);
        }
    }
}

#[test]
fn zero_discount_gives_one_step_errors() {
    let (r, v, d) = trajectory();
    let out = compute_gae(&r, &v, &d, 1e-300, 0.95, 10.0).unwrap();
    for t in 0..r.len() {
        assert!((out.raw[t] - (r[t] - v[t])).abs() < 1e-12);
    }
}

#[test]
fn unit_lambda_is_the_monte_carlo_advantage() {
    let (r, v, d) = trajectory();
    let out = compute_gae(&r, &v, &d, 0.97, 1.0, -0.4).unwrap();
    let g = monte_carlo_oracle(&r, &d, 0.97, -0.4);
    for t in 0..r.len() {
        assert!((out.raw[t] - (g[t] - v[t])).abs() < 1e-12);
    }
}

#[test]
fn empty_trajectory_is_an_error() {
    assert!(matches!(
        compute_gae(&[], &[], &[], 0.99, 0.95, 0.0),
        Err(RlError::EmptyTrajectory)
    ));
}

proptest! {
    #[test]
    fn normalized_advantages_have_zero_mean_unit_spread(x in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let y = normalize(&x);
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((sd - 1.0).abs() < 1e-6);
    }
}

#[test]
fn normalization_tolerance_on_a_typical_rollout() {
    let x: Vec<f64> = (0..2048).map(|i| ((i * 7919) % 1000) as f64 / 37.0 - 9.0).collect();
    let y = normalize(&x);
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-10);
    assert!((sd - 1.0).abs() < 1e-8);
}
