use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softbar_core::arena::{reward_for_offset, ArenaConfig, ArenaState, KnobSpec, ModuleMount};
use softbar_core::compliance::MaterialProfile;
use softbar_core::geometry::{TipPose, Vec2};
use softbar_core::ledger::UptimeLedger;
use softbar_core::primitives::{execute_primitive, SweepAction};

fn noiseless() -> ArenaConfig {
    ArenaConfig::default().noiseless()
}

/// One module below the knob, its axis on the world `y` axis.
fn single_module(friction: f64) -> ArenaConfig {
    let mut c = noiseless();
    let material = MaterialProfile {
        transition_noise: 0.0,
        ..MaterialProfile::tpu()
    };
    c.modules = vec![ModuleMount::facing_center(-PI / 2.0, 0.155, material)];
    c.modules[0].mount_position[0] = 0.0;
    c.knob = KnobSpec {
        rotational_friction: friction,
        ..KnobSpec::default()
    };
    c
}

/// Moves module 0 so that its rigid tip sits at world point `w`.
fn command_tip(state: &mut ArenaState, c: &ArenaConfig, w: Vec2) -> f64 {
    let m = &c.modules[0];
    let local = w - Vec2::new(m.mount_position[0], m.mount_position[1]);
    let (a, b) = m.geometry.inverse_kinematics(TipPose::new(local.x, local.y)).unwrap();
    let start = state.servo_angles.clone();
    let mut pen: f64 = 0.0;
    for j in 1..=16 {
        let f = j as f64 / 16.0;
        let t = [start[0] + f * (a - start[0]), start[1] + f * (b - start[1])];
        let r = state.set_servo_targets(c, &t).unwrap();
        assert!(r.final_energy <= r.initial_energy + 1e-12);
        pen = pen.max(r.max_penetration);
    }
    pen
}

#[test]
fn reward_at_reference_offsets() {
    let c = noiseless();
    let cases = [
        (0.0, 60.0),
        (0.10 / PI, 60.0 - 5.0 * (0.10 / PI)),
        (0.05, 9.75),
        (0.25 / PI, 10.0 - 5.0 * (0.25 / PI)),
        (0.1, -0.5),
        (PI, -5.0 * PI),
    ];
    for (d, want) in cases {
        assert!((reward_for_offset(d, &c) - want).abs() < 1e-12, "Δ = {d}");
        assert!((reward_for_offset(-d, &c) - want).abs() < 1e-12, "Δ = -{d}");
    }
}

#[test]
fn reset_is_deterministic_and_observes_the_start_angle() {
    let c = ArenaConfig::default();
    let a = ArenaState::reset(&c, 42).unwrap();
    let b = ArenaState::reset(&c, 42).unwrap();
    assert_eq!(a, b);
    let obs = a.observe(&c);
    assert_eq!(obs.len(), 8);
    assert!((obs[6] - c.knob.start_angle.cos()).abs() < 1e-12);
    assert!((obs[7] - 1.0).abs() < 1e-12);
}

#[test]
fn reset_at_goal_scores_sixty() {
    let mut c = noiseless();
    c.knob.start_angle = 0.0;
    let s = ArenaState::reset(&c, 0).unwrap();
    assert_eq!(s.reward(&c), 60.0);
    assert_eq!(s.is_done(&c), (true, true));
}

#[test]
fn done_flags_follow_offset_and_cap() {
    let mut c = noiseless();
    c.knob.start_angle = 1.0;
    let mut s = ArenaState::reset(&c, 0).unwrap();
    assert_eq!(s.is_done(&c), (false, false));
    s.step_count = c.max_episode_steps;
    assert_eq!(s.is_done(&c), (true, false));
}

#[test]
fn observation_endpoints() {
    let c = noiseless();
    let mut s = ArenaState::reset(&c, 0).unwrap();
    let lim = c.modules[0].geometry.servo_limits;
    s.servo_angles[0] = lim[0].min;
    s.servo_angles[1] = lim[1].mid();
    let obs = s.observe(&c);
    assert_eq!(obs[0], -1.0);
    assert!(obs[1].abs() < 1e-15);
}

#[test]
fn holding_still_without_contact_changes_nothing() {
    let c = noiseless();
    let mut s = ArenaState::reset(&c, 0).unwrap();
    let before = s.clone();
    let targets = s.servo_angles.clone();
    let r = s.set_servo_targets(&c, &targets).unwrap();
    assert!(!r.any_contact);
    assert_eq!(s.servo_angles, before.servo_angles);
    assert_eq!(s.knob_angle, before.knob_angle);
    for i in 0..3 {
        assert!((s.tips[i] - before.tips[i]).norm() < 1e-12);
    }
}

#[test]
fn tangential_push_turns_the_knob_along_the_push() {
    // lobe along -y; tip placed right of it then driven left, below the axis
    let c = single_module(0.0);
    let mut s = ArenaState::reset(&c, 0).unwrap();
    command_tip(&mut s, &c, Vec2::new(0.016, -0.04));
    let before = s.knob_angle;
    let pen = command_tip(&mut s, &c, Vec2::new(-0.004, -0.04));
    let turn = s.knob_angle - before;
    // force (-F, 0) at (x, -0.04) has torque -0.04·F
    assert!(turn < -1e-3, "turn {turn}");
    assert!(pen < c.knob.lobe_half_width / 10.0);
}

#[test]
fn radial_push_on_a_lobe_end_barely_turns_the_knob() {
    let c = single_module(KnobSpec::default().rotational_friction);
    let mut s = ArenaState::reset(&c, 0).unwrap();
    let tip_reach = c.knob.lobe_length;
    command_tip(&mut s, &c, Vec2::new(0.0, -tip_reach - 0.01));
    let before = s.knob_angle;
    command_tip(&mut s, &c, Vec2::new(0.0, -tip_reach + 0.004));
    assert!((s.knob_angle - before).abs() < 1e-3);
}

#[test]
fn no_tunneling_over_a_thousand_random_steps() {
    let c = ArenaConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ledger = UptimeLedger::new();
    let mut s = ArenaState::reset(&c, 1).unwrap();
    let bound = c.knob.lobe_half_width / 10.0;
    for _ in 0..1000 {
        let a = SweepAction::from_index(rng.random_range(0..c.n_actions()));
        let r = execute_primitive(&mut s, a, &c, &mut ledger).unwrap();
        for sub in &r.substeps {
            assert!(sub.max_penetration < bound, "penetration {}", sub.max_penetration);
            assert!(sub.final_energy <= sub.initial_energy + 1e-12);
        }
        let rw = s.reward(&c);
        assert!((-5.0 * PI..=60.0).contains(&rw));
        if s.is_done(&c).0 {
            s = ArenaState::reset(&c, rng.random()).unwrap();
        }
    }
    assert_eq!(ledger.active_steps, 1000);
}

#[test]
fn noiseless_rollouts_are_bitwise_reproducible() {
    let c = noiseless();
    let run = || {
        let mut s = ArenaState::reset(&c, 9).unwrap();
        let mut ledger = UptimeLedger::new();
        let mut trace = Vec::new();
        for a in [0, 3, 5, 1, 2, 4, 1, 1] {
            execute_primitive(&mut s, SweepAction::from_index(a), &c, &mut ledger).unwrap();
            trace.push(s.clone());
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn noisy_rollouts_repeat_under_the_same_seed() {
    let c = ArenaConfig::with_material(MaterialProfile::silicone());
    let run = |seed| {
        let mut s = ArenaState::reset(&c, seed).unwrap();
        let mut ledger = UptimeLedger::new();
        for a in [1, 3, 5] {
            execute_primitive(&mut s, SweepAction::from_index(a), &c, &mut ledger).unwrap();
        }
        s
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).servo_angles, run(4).servo_angles);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = noiseless();
    c.success_threshold = 0.5;
    assert!(ArenaState::reset(&c, 0).is_err());
    let mut c = noiseless();
    c.modules.clear();
    assert!(c.validate().is_err());
    let mut c = noiseless();
    c.modules[1].mount_position = [1.0, 1.0];
    assert!(c.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn observations_stay_in_bounds(actions in proptest::collection::vec(0usize..6, 1..12), seed in 0u64..1000) {
        let c = ArenaConfig::default();
        let mut s = ArenaState::reset(&c, seed).unwrap();
        let mut ledger = UptimeLedger::new();
        for a in actions {
            execute_primitive(&mut s, SweepAction::from_index(a), &c, &mut ledger).unwrap();
            let obs = s.observe(&c);
            prop_assert!(obs.iter().all(|v| v.abs() <= 1.0));
            prop_assert!((obs[6] * obs[6] + obs[7] * obs[7] - 1.0).abs() < 1e-12);
            for (i, m) in c.modules.iter().enumerate() {
                for k in 0..2 {
                    prop_assert!(m.geometry.servo_limits[k].contains(s.servo_angles[2 * i + k]));
                }
            }
        }
    }
}
