use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softbar_rl::mlp::Mlp;
use softbar_rl::ppo::{
    argmax, log_softmax, minibatch_loss, minibatch_loss_value, policy_forward, sample_action, softmax, LossWeights,
    Sample,
};
use softbar_rl::PolicyParams;

/// Dense forward pass written out layer by layer.
fn forward_oracle(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut y = vec![0.0; n_out];
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = params[off + n_out * n_in + r];
            for c in 0..n_in {
                s += params[off + r * n_in + c] * a[c];
            }
            *yr = if l + 2 < sizes.len() { s.tanh() } else { s };
        }
        off += n_out * n_in + n_out;
        a = y;
    }
    a
}

#[test]
fn forward_pass_by_hand() {
    // 2 -> 2 -> 1, weights row-major then biases
    let p = vec![0.5, -1.0, 2.0, 0.25, 0.1, -0.2, 1.5, -3.0, 0.7];
    let net = Mlp::from_params(&[2, 2, 1], p).unwrap();
    let x = [0.4, -0.6];
    let h0 = (0.5 * 0.4 + 1.0 * 0.6 + 0.1f64).tanh();
    let h1 = (2.0 * 0.4 - 0.25 * 0.6 - 0.2f64).tanh();
    let want = 1.5 * h0 - 3.0 * h1 + 0.7;
    assert!((net.forward(&x)[0] - want).abs() < 1e-15);
}

#[test]
fn forward_pass_matches_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sizes = [8, 64, 64, 6];
    let net = Mlp::orthogonal(&sizes, 2f64.sqrt(), 0.5, &mut rng);
    for _ in 0..20 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (a, b) in net.forward(&x).iter().zip(forward_oracle(&sizes, net.params(), &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(Mlp::from_params(&sizes, vec![0.0; 3]).is_none());
}

#[test]
fn softmax_is_a_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-50.0..50.0)).collect();
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(argmax(&z), argmax(&p));
    }
    let big = softmax(&[1000.0, 1000.0]);
    assert!((big[0] - 0.5).abs() < 1e-14);
    let lp = log_softmax(&[0.0, 0.0, 0.0, 0.0]);
    assert!(lp.iter().all(|v| (v + 4f64.ln()).abs() < 1e-14));
}

#[test]
fn sampling_follows_the_softmax() {
    let logits = [0.0, 2f64.ln(), 3f64.ln()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 60_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let (a, lp) = sample_action(&logits, &mut rng);
        assert!((lp - log_softmax(&logits)[a]).abs() < 1e-15);
        counts[a] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let p = (k + 1) as f64 / 6.0;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((*c as f64 / n as f64 - p).abs() < 4.0 * sd, "action {k}: {c}");
    }
}

fn batch(params: &PolicyParams, rng: &mut ChaCha8Rng, eps: f64, n: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    while out.len() < n {
        let obs: Vec<f64> = (0..params.obs_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (logits, _) = policy_forward(params, &obs).unwrap();
        let action = rng.random_range(0..params.n_actions());
        let shift: f64 = rng.random_range(-0.3..0.3);
        let ratio = shift.exp();
        // keep away from the kinks of the clipped objective
        if ((ratio - 1.0).abs() - eps).abs() < 1e-3 {
            continue;
        }
        out.push(Sample {
            old_log_prob: log_softmax(&logits)[action] - shift,
            observation: obs,
            action,
            advantage: rng.random_range(-2.0..2.0),
            ret: rng.random_range(-3.0..3.0),
        });
    }
    out
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let w = LossWeights {
        clip_epsilon: 0.2,
        value_coefficient: 0.5,
        entropy_coefficient: 0.01,
    };
    let h = 1e-6;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let params = PolicyParams::init(5, 4, &[16, 16], &mut rng);
        let samples = batch(&params, &mut rng, w.clip_epsilon, 16);
        let (_, grad) = minibatch_loss(&params, &samples, w);
        let flat = params.flat();
        let mut p = params.clone();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..flat.len() {
            let mut x = flat.clone();
            x[i] += h;
            p.set_flat(&x);
            let up = minibatch_loss_value(&p, &samples, w);
            x[i] -= 2.0 * h;
            p.set_flat(&x);
            let down = minibatch_loss_value(&p, &samples, w);
            let fd = (up - down) / (2.0 * h);
            num += (fd - grad[i]).powi(2);
            den += grad[i].powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-4, "init {seed}: relative error {rel}");
    }
}

/// Entropy of the policy at `obs`, from softmax probabilities.
fn entropy(params: &PolicyParams, obs: &[f64]) -> f64 {
    let p = softmax(&params.actor.forward(obs));
    -p.iter().map(|v| if *v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>()
}

#[test]
fn unit_ratio_and_zero_advantage_leave_the_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = PolicyParams::init(3, 5, &[8], &mut rng);
    let c_e = 0.05;
    let w = LossWeights {
        clip_epsilon: 0.2,
        value_coefficient: 0.0,
        entropy_coefficient: c_e,
    };
    let samples: Vec<Sample> = (0..6)
        .map(|i| {
            let obs = vec![0.1 * i as f64, -0.3, 0.5];
            let lp = log_softmax(&params.actor.forward(&obs));
            Sample {
                old_log_prob: lp[i % 5],
                observation: obs,
                action: i % 5,
                advantage: 0.0,
                ret: 0.0,
            }
        })
        .collect();
    let (stats, grad) = minibatch_loss(&params, &samples, w);
    assert_eq!(stats.clip_fraction, 0.0);
    assert!(stats.approx_kl.abs() < 1e-15);
    let na = params.actor.params().len();
    assert!(grad[na..].iter().all(|g| *g == 0.0));
    let mean_entropy = |p: &PolicyParams| samples.iter().map(|s| entropy(p, &s.observation)).sum::<f64>() / 6.0;
    let flat = params.flat();
    let mut p = params.clone();
    let h = 1e-6;
    for i in (0..na).step_by(3) {
        let mut x = flat.clone();
        x[i] += h;
        p.set_flat(&x);
        let up = mean_entropy(&p);
        x[i] -= 2.0 * h;
        p.set_flat(&x);
        let down = mean_entropy(&p);
        let want = -c_e * (up - down) / (2.0 * h);
        assert!((grad[i] - want).abs() < 1e-8, "param {i}: {} vs {want}", grad[i]);
    }
}

#[test]
fn clipping_is_inactive_at_unit_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = PolicyParams::init(4, 3, &[8, 8], &mut rng);
    let mut samples = batch(&params, &mut rng, 0.2, 12);
    for s in &mut samples {
        s.old_log_prob = log_softmax(&params.actor.forward(&s.observation))[s.action];
    }
    let clipped = LossWeights {
        clip_epsilon: 0.2,
        value_coefficient: 0.5,
        entropy_coefficient: 0.0,
    };
    let wide = LossWeights {
        clip_epsilon: 1e6,
        ..clipped
    };
    let (a, ga) = minibatch_loss(&params, &samples, clipped);
    let (b, gb) = minibatch_loss(&params, &samples, wide);
    assert_eq!(a.total, b.total);
    assert_eq!(ga, gb);
    let mean_adv = samples.iter().map(|s| s.advantage).sum::<f64>() / 12.0;
    assert!((a.policy + mean_adv).abs() < 1e-12);
}
