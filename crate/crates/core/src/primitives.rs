//! Hierarchical action space: servo deltas, tip moves and sweeps.
//!
//! Directions are in the module frame, where `+y` points at the knob axis.
//! `Left` is `-x` and `Right` is `+x`; for a module facing the knob, `+x`
//! runs counter-clockwise around it. A left sweep ends with a rightward
//! power stroke and so turns a caught lobe counter-clockwise (positive knob
//! rotation); a right sweep turns it clockwise.

use serde::{Deserialize, Serialize};

use crate::arena::{ArenaConfig, ArenaError, ArenaState, SubstepReport};
use crate::geometry::{TipPose, Vec2};
use crate::ledger::UptimeLedger;

/// Smallest fraction of a tip step tried when projecting onto the workspace.
pub const MIN_STEP_FRACTION: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowAction {
    pub servo_index: usize,
    /// `+1` or `-1`.
    pub sign: i8,
    pub magnitude: f64,
}

impl LowAction {
    pub fn delta(&self) -> f64 {
        f64::from(self.sign) * self.magnitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipDirection {
    Extend,
    Retract,
    Left,
    Right,
}

impl TipDirection {
    /// Unit displacement in the module frame.
    pub fn unit(self) -> Vec2 {
        match self {
            TipDirection::Extend => Vec2::new(0.0, 1.0),
            TipDirection::Retract => Vec2::new(0.0, -1.0),
            TipDirection::Left => Vec2::new(-1.0, 0.0),
            TipDirection::Right => Vec2::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipAction {
    pub module_index: usize,
    pub direction: TipDirection,
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Left,
    Right,
}

impl SweepDirection {
    /// Sign of the knob rotation a sweep in this direction induces.
    pub fn knob_sign(self) -> f64 {
        match self {
            SweepDirection::Left => 1.0,
            SweepDirection::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SweepAction {
    pub module_index: usize,
    pub direction: SweepDirection,
}

impl SweepAction {
    /// Index `module * 2 + (0 for left, 1 for right)`.
    pub fn from_index(index: usize) -> Self {
        Self {
            module_index: index / 2,
            direction: if index.is_multiple_of(2) {
                SweepDirection::Left
            } else {
                SweepDirection::Right
            },
        }
    }

    pub fn index(&self) -> usize {
        2 * self.module_index + usize::from(self.direction == SweepDirection::Right)
    }
}

/// All `2N` sweeps in index order.
pub fn action_space(n_modules: usize) -> Vec<SweepAction> {
    (0..2 * n_modules).map(SweepAction::from_index).collect()
}

pub fn expand_sweep(action: SweepAction, step_size: f64) -> [TipAction; 4] {
    use TipDirection::*;
    let dirs = match action.direction {
        SweepDirection::Left => [Left, Extend, Right, Retract],
        SweepDirection::Right => [Right, Extend, Left, Retract],
    };
    dirs.map(|direction| TipAction {
        module_index: action.module_index,
        direction,
        step_size,
    })
}

/// Servo targets for a tip move, starting from the commanded servo angles.
///
/// Infeasible moves are shortened by bisection on the step fraction down to
/// [`MIN_STEP_FRACTION`]; if even that fails the current angles are kept.
pub fn expand_tip(action: TipAction, servo_angles: &[f64], config: &ArenaConfig) -> Vec<f64> {
    let mut targets = servo_angles.to_vec();
    let i = action.module_index;
    let geom = &config.modules[i].geometry;
    let (a, b) = (servo_angles[2 * i], servo_angles[2 * i + 1]);
    let Ok(tip) = geom.forward_kinematics(a, b) else {
        return targets;
    };
    let offset = action.direction.unit() * action.step_size;
    let solve = |fraction: f64| {
        let p = tip.to_vec() + offset * fraction;
        geom.inverse_kinematics(TipPose::new(p.x, p.y)).ok()
    };
    let solution = solve(1.0).or_else(|| {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = None;
        while hi - lo > MIN_STEP_FRACTION / 2.0 {
            let mid = 0.5 * (lo + hi);
            match solve(mid) {
                Some(s) => {
                    best = Some(s);
                    lo = mid;
                }
                None => hi = mid,
            }
        }
        best.filter(|_| lo >= MIN_STEP_FRACTION)
    });
    if let Some((t1, t2)) = solution {
        targets[2 * i] = t1;
        targets[2 * i + 1] = t2;
    }
    targets
}

/// Summary of one executed sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitiveReport {
    pub knob_delta: f64,
    pub substeps: Vec<SubstepReport>,
    /// Every commanded servo-target vector, in order.
    pub targets: Vec<Vec<f64>>,
}

/// Executes one sweep as one environment step.
pub fn execute_primitive(
    state: &mut ArenaState,
    action: SweepAction,
    config: &ArenaConfig,
    ledger: &mut UptimeLedger,
) -> Result<PrimitiveReport, ArenaError> {
    run_primitive(state, action, config, ledger, |_| {})
}

/// [`execute_primitive`] that also returns the state after every sub-step.
pub fn execute_primitive_traced(
    state: &mut ArenaState,
    action: SweepAction,
    config: &ArenaConfig,
    ledger: &mut UptimeLedger,
) -> Result<(PrimitiveReport, Vec<ArenaState>), ArenaError> {
    let mut trace = Vec::new();
    let report = run_primitive(state, action, config, ledger, |s| trace.push(s.clone()))?;
    Ok((report, trace))
}

fn run_primitive(
    state: &mut ArenaState,
    action: SweepAction,
    config: &ArenaConfig,
    ledger: &mut UptimeLedger,
    mut observer: impl FnMut(&ArenaState),
) -> Result<PrimitiveReport, ArenaError> {
    assert!(action.module_index < config.n_modules(), "module index out of range");
    let knob_before = state.knob_angle;
    state.knob_anchor = state.knob_angle;
    let mut report = PrimitiveReport::default();
    let k = config.substeps;
    for tip_action in expand_sweep(action, config.tip_step_size) {
        let start = state.servo_angles.clone();
        let goal = expand_tip(tip_action, &start, config);
        for j in 1..=k {
            let f = j as f64 / k as f64;
            let targets: Vec<f64> = start.iter().zip(&goal).map(|(s, g)| s + f * (g - s)).collect();
            report.substeps.push(state.set_servo_targets(config, &targets)?);
            report.targets.push(targets);
            observer(state);
        }
    }
    state.step_count += 1;
    ledger.record_primitive();
    report.knob_delta = state.knob_angle - knob_before;
    Ok(report)
}

/// Decomposes the move `from → to` into unit servo deltas of `resolution`.
///
/// The remainder on each servo is below one quantum.
pub fn quantize(from: &[f64], to: &[f64], resolution: f64) -> Vec<LowAction> {
    assert!(resolution > 0.0, "resolution must be positive");
    let mut out = Vec::new();
    for (servo_index, (a, b)) in from.iter().zip(to).enumerate() {
        let d = b - a;
        let n = (d.abs() / resolution).round() as usize;
        let sign = if d < 0.0 { -1 } else { 1 };
        out.extend((0..n).map(|_| LowAction {
            servo_index,
            sign,
            magnitude: resolution,
        }));
    }
    out
}

/// Applies low-level actions to a servo vector.
pub fn replay(from: &[f64], actions: &[LowAction]) -> Vec<f64> {
    let mut out = from.to_vec();
    for a in actions {
        out[a.servo_index] += a.delta();
    }
    out
}
