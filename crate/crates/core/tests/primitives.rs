use std::collections::HashSet;
use std::f64::consts::PI;

use softbar_core::arena::{ArenaConfig, ArenaState, ModuleMount};
use softbar_core::compliance::MaterialProfile;
use softbar_core::geometry::{TipPose, Vec2};
use softbar_core::ledger::UptimeLedger;
use softbar_core::primitives::{
    action_space, execute_primitive, execute_primitive_traced, expand_sweep, expand_tip, quantize, replay, SweepAction,
    SweepDirection, TipAction, TipDirection,
};

fn noiseless() -> ArenaConfig {
    ArenaConfig::default().noiseless()
}

fn tip_action(direction: TipDirection, step_size: f64) -> TipAction {
    TipAction {
        module_index: 0,
        direction,
        step_size,
    }
}

#[test]
fn six_distinct_sweeps_for_three_modules() {
    let space = action_space(3);
    assert_eq!(space.len(), 6);
    let expansions: HashSet<String> = space.iter().map(|a| format!("{:?}", expand_sweep(*a, 0.02))).collect();
    assert_eq!(expansions.len(), 6);
    assert_eq!(SweepAction::from_index(5).module_index, 2);
    assert_eq!(SweepAction::from_index(5).direction, SweepDirection::Right);
}

#[test]
fn extend_then_retract_returns_the_tip() {
    let c = noiseless();
    let s = ArenaState::reset(&c, 0).unwrap();
    let g = &c.modules[0].geometry;
    let out = expand_tip(tip_action(TipDirection::Extend, 0.01), &s.servo_angles, &c);
    let back = expand_tip(tip_action(TipDirection::Retract, 0.01), &out, &c);
    let t0 = g.forward_kinematics(s.servo_angles[0], s.servo_angles[1]).unwrap();
    let t1 = g.forward_kinematics(back[0], back[1]).unwrap();
    assert!(t0.distance(&t1) < 1e-6);
    assert_eq!(&out[2..], &s.servo_angles[2..]);
}

#[test]
fn left_move_matches_ik_of_the_shifted_tip() {
    let c = noiseless();
    let s = ArenaState::reset(&c, 0).unwrap();
    let g = &c.modules[0].geometry;
    let out = expand_tip(tip_action(TipDirection::Left, 0.01), &s.servo_angles, &c);
    let tip = g.forward_kinematics(s.servo_angles[0], s.servo_angles[1]).unwrap();
    let want = Vec2::new(tip.x - 0.01, tip.y);
    // grid + zoom search over the servo box for the shifted tip
    let dist = |a: f64, b: f64| {
        g.forward_kinematics(a, b)
            .map_or(f64::INFINITY, |t| (t.to_vec() - want).norm())
    };
    let [l1, l2] = g.servo_limits;
    let (mut ra, mut rb) = ((l1.min, l1.max), (l2.min, l2.max));
    let mut best = (0.0, 0.0);
    for _ in 0..12 {
        let n = 120;
        let mut bd = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let a = ra.0 + (ra.1 - ra.0) * i as f64 / n as f64;
                let b = rb.0 + (rb.1 - rb.0) * j as f64 / n as f64;
                let d = dist(a, b);
                if d < bd {
                    bd = d;
                    best = (a, b);
                }
            }
        }
        let (wa, wb) = (3.0 * (ra.1 - ra.0) / n as f64, 3.0 * (rb.1 - rb.0) / n as f64);
        ra = ((best.0 - wa).max(l1.min), (best.0 + wa).min(l1.max));
        rb = ((best.1 - wb).max(l2.min), (best.1 + wb).min(l2.max));
    }
    assert!((out[0] - best.0).abs() < 1e-6 && (out[1] - best.1).abs() < 1e-6);
}

#[test]
fn move_past_the_workspace_is_projected() {
    let c = noiseless();
    let s = ArenaState::reset(&c, 0).unwrap();
    let g = &c.modules[0].geometry;
    let reach = g.proximal_length + g.distal_length;
    let out = expand_tip(tip_action(TipDirection::Extend, reach), &s.servo_angles, &c);
    assert_ne!(&out[..2], &s.servo_angles[..2], "a partial extension is feasible");
    assert!(g.within_limits(out[0], out[1]));
    let tip0 = g.forward_kinematics(s.servo_angles[0], s.servo_angles[1]).unwrap();
    let tip1 = g.forward_kinematics(out[0], out[1]).unwrap();
    assert!((tip1.x - tip0.x).abs() < 1e-9 && tip1.y > tip0.y);
    assert!(!g.workspace_contains(TipPose::new(tip0.x, tip0.y + reach)));
}

#[test]
fn sweeps_without_contact_close_their_cycle() {
    let c = noiseless();
    let mut closed = 0;
    for a in action_space(3) {
        let mut s = ArenaState::reset(&c, 0).unwrap();
        let before = s.clone();
        let mut ledger = UptimeLedger::new();
        let r = execute_primitive(&mut s, a, &c, &mut ledger).unwrap();
        assert_eq!(s.step_count, 1);
        assert_eq!(ledger.active_seconds, 5.0);
        assert_eq!(r.substeps.len(), 4 * c.substeps);
        if r.substeps.iter().all(|x| !x.any_contact) {
            closed += 1;
            for (x, y) in s.servo_angles.iter().zip(&before.servo_angles) {
                assert!((x - y).abs() < 1e-6);
            }
            assert_eq!(s.knob_angle, before.knob_angle);
        }
    }
    assert!(closed > 0, "every sweep touched the knob");
}

#[test]
fn turning_sweeps_move_the_knob_their_way() {
    let c = noiseless();
    let mut moved = 0;
    for a in action_space(3) {
        let mut s = ArenaState::reset(&c, 0).unwrap();
        let r = execute_primitive(&mut s, a, &c, &mut UptimeLedger::new()).unwrap();
        if r.knob_delta.abs() > 1e-3 {
            moved += 1;
            assert_eq!(
                r.knob_delta.signum(),
                a.direction.knob_sign(),
                "{a:?}: {}",
                r.knob_delta
            );
        }
    }
    assert!(moved >= 1);
}

#[test]
fn executed_targets_are_quantizable_and_within_limits() {
    let c = noiseless();
    let mut s = ArenaState::reset(&c, 0).unwrap();
    let mut prev = s.servo_angles.clone();
    for a in [1, 4, 5, 0] {
        let r = execute_primitive(&mut s, SweepAction::from_index(a), &c, &mut UptimeLedger::new()).unwrap();
        for t in &r.targets {
            for (i, m) in c.modules.iter().enumerate() {
                for k in 0..2 {
                    assert!(m.geometry.servo_limits[k].contains(t[2 * i + k]));
                }
            }
            let lows = quantize(&prev, t, c.angular_resolution);
            let back = replay(&prev, &lows);
            for (x, y) in back.iter().zip(t) {
                assert!((x - y).abs() <= c.angular_resolution / 2.0 + 1e-12);
            }
            prev = t.clone();
        }
    }
}

#[test]
fn mirrored_sweeps_give_mirrored_states() {
    let mut c = noiseless();
    let material = MaterialProfile {
        transition_noise: 0.0,
        ..MaterialProfile::tpu()
    };
    c.modules = vec![ModuleMount::facing_center(-PI / 2.0, 0.155, material)];
    c.modules[0].mount_position[0] = 0.0;
    c.knob.start_angle = PI / 2.0;
    let run = |a| {
        let mut s = ArenaState::reset(&c, 0).unwrap();
        let (_, trace) =
            execute_primitive_traced(&mut s, SweepAction::from_index(a), &c, &mut UptimeLedger::new()).unwrap();
        (s, trace)
    };
    let (left, lt) = run(0);
    let (right, rt) = run(1);
    for (l, r) in lt.iter().zip(&rt) {
        let (pl, pr) = (l.world_tip(&c, 0), r.world_tip(&c, 0));
        assert!(
            (pl.x + pr.x).abs() < 1e-9 && (pl.y - pr.y).abs() < 1e-9,
            "{pl:?} vs {pr:?}"
        );
    }
    assert!((left.servo_angles[0] - right.servo_angles[1]).abs() < 1e-9);
    assert!(((left.knob_angle - PI / 2.0) + (right.knob_angle - PI / 2.0)).abs() < 1e-9);
    assert!(
        (left.knob_angle - PI / 2.0).abs() > 1e-3,
        "the sweeps should engage the lobe"
    );
}
