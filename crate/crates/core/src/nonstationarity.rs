//! Time-varying dynamics: schedules of parameter multipliers and their
//! application to an arena configuration.
//!
//! Parameters are addressed by dotted paths:
//!
//! - `module.<i>.material.hinge_stiffness.k<1|2|3>`
//! - `module.<i>.material.{link_axial_stiffness,creep_rate,transition_noise}`
//! - `knob.{torsional_stiffness,rotational_friction}`
//!
//! The module index and the hinge suffix may be `*` to address all of them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{ArenaConfig, ArenaError, ArenaState};
use crate::ledger::UptimeLedger;
use crate::primitives::{execute_primitive, SweepAction};

#[derive(Debug, Error)]
pub enum NonstationarityError {
    #[error("unknown parameter path `{0}`")]
    UnknownPath(String),
    #[error("invalid schedule for `{target}`: {reason}")]
    InvalidSchedule { target: String, reason: String },
    #[error("dynamics violate an invariant: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: u64,
    pub multiplier: f64,
}

/// Multiplier as a function of the environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant {
        value: f64,
    },
    Trend {
        kind: TrendKind,
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ceiling: Option<f64>,
    },
    Jump {
        events: Vec<JumpEvent>,
    },
    Cyclic {
        amplitude: f64,
        /// Steps per cycle.
        period: u64,
        #[serde(default)]
        phase: f64,
    },
    /// Product of the parts.
    Composite {
        parts: Vec<ScheduleKind>,
    },
}

impl ScheduleKind {
    pub fn evaluate(&self, t: u64) -> f64 {
        match self {
            ScheduleKind::Constant { value } => *value,
            ScheduleKind::Trend {
                kind,
                rate,
                floor,
                ceiling,
            } => {
                let raw = match kind {
                    TrendKind::Linear => 1.0 + rate * t as f64,
                    TrendKind::Exponential => (1.0 + rate).powf(t as f64),
                };
                let lo = floor.unwrap_or(f64::NEG_INFINITY);
                let hi = ceiling.unwrap_or(f64::INFINITY);
                raw.clamp(lo, hi)
            }
            ScheduleKind::Jump { events } => events
                .iter()
                .take_while(|e| e.step <= t)
                .last()
                .map_or(1.0, |e| e.multiplier),
            ScheduleKind::Cyclic {
                amplitude,
                period,
                phase,
            } => {
                let k = (t % period) as f64;
                1.0 + amplitude * (2.0 * PI * k / *period as f64 + phase).sin()
            }
            ScheduleKind::Composite { parts } => parts.iter().map(|p| p.evaluate(t)).product(),
        }
    }

    /// Checks structural invariants and that the multiplier stays positive.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ScheduleKind::Constant { value } => positive(*value, "constant value"),
            ScheduleKind::Trend {
                kind,
                rate,
                floor,
                ceiling,
            } => {
                if !rate.is_finite() {
                    return Err("trend rate must be finite".into());
                }
                if let (Some(lo), Some(hi)) = (floor, ceiling) {
                    if lo > hi {
                        return Err(format!("floor {lo} exceeds ceiling {hi}"));
                    }
                }
                if let Some(lo) = floor {
                    positive(*lo, "floor")?;
                }
                match kind {
                    TrendKind::Exponential if *rate <= -1.0 => Err(format!("exponential rate {rate} must exceed -1")),
                    TrendKind::Linear if *rate < 0.0 && floor.is_none() => {
                        Err("a decreasing linear trend needs a positive floor".into())
                    }
                    _ => Ok(()),
                }
            }
            ScheduleKind::Jump { events } => {
                if events.windows(2).any(|w| w[1].step <= w[0].step) {
                    return Err("jump events must be strictly increasing in step".into());
                }
                events
                    .iter()
                    .try_for_each(|e| positive(e.multiplier, "jump multiplier"))
            }
            ScheduleKind::Cyclic {
                amplitude,
                period,
                phase,
            } => {
                if *period == 0 {
                    return Err("cyclic period must be positive".into());
                }
                if !(amplitude.is_finite() && amplitude.abs() < 1.0 && phase.is_finite()) {
                    return Err(format!("cyclic amplitude {amplitude} must satisfy |a| < 1"));
                }
                Ok(())
            }
            ScheduleKind::Composite { parts } => parts.iter().try_for_each(ScheduleKind::validate),
        }
    }
}

fn positive(v: f64, what: &str) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{what} must be positive, got {v}"))
    }
}

/// A schedule bound to a parameter path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub target: String,
    #[serde(flatten)]
    pub kind: ScheduleKind,
}

impl Schedule {
    pub fn new(target: impl Into<String>, kind: ScheduleKind) -> Self {
        Self {
            target: target.into(),
            kind,
        }
    }

    pub fn evaluate(&self, t: u64) -> f64 {
        self.kind.evaluate(t)
    }

    pub fn validate(&self, config: &ArenaConfig) -> Result<(), NonstationarityError> {
        self.kind
            .validate()
            .map_err(|reason| NonstationarityError::InvalidSchedule {
                target: self.target.clone(),
                reason,
            })?;
        resolve(&self.target, config)?;
        Ok(())
    }
}

/// Multipliers by parameter path; absent paths are 1.
pub type DynamicsVector = BTreeMap<String, f64>;

/// Evaluates every schedule at `t`; schedules on the same path multiply.
pub fn dynamics_at(schedules: &[Schedule], t: u64) -> DynamicsVector {
    let mut psi = DynamicsVector::new();
    for s in schedules {
        *psi.entry(s.target.clone()).or_insert(1.0) *= s.evaluate(t);
    }
    psi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Hinge(usize),
    LinkAxial,
    CreepRate,
    TransitionNoise,
    TorsionalStiffness,
    RotationalFriction,
}

/// Expands a path into concrete `(module, parameter)` targets.
fn resolve(path: &str, config: &ArenaConfig) -> Result<Vec<(Option<usize>, Param)>, NonstationarityError> {
    let unknown = || NonstationarityError::UnknownPath(path.to_string());
    let parts: Vec<&str> = path.split('.').collect();
    match parts.as_slice() {
        ["knob", "torsional_stiffness"] => Ok(vec![(None, Param::TorsionalStiffness)]),
        ["knob", "rotational_friction"] => Ok(vec![(None, Param::RotationalFriction)]),
        ["module", idx, "material", rest @ ..] => {
            let modules: Vec<usize> = if *idx == "*" {
                (0..config.n_modules()).collect()
            } else {
                let i: usize = idx.parse().map_err(|_| unknown())?;
                if i >= config.n_modules() {
                    return Err(unknown());
                }
                vec![i]
            };
            let params: Vec<Param> = match rest {
                ["hinge_stiffness", "*"] => (0..3).map(Param::Hinge).collect(),
                ["hinge_stiffness", k] => match *k {
                    "k1" => vec![Param::Hinge(0)],
                    "k2" => vec![Param::Hinge(1)],
                    "k3" => vec![Param::Hinge(2)],
                    _ => return Err(unknown()),
                },
                ["link_axial_stiffness"] => vec![Param::LinkAxial],
                ["creep_rate"] => vec![Param::CreepRate],
                ["transition_noise"] => vec![Param::TransitionNoise],
                _ => return Err(unknown()),
            };
            Ok(modules
                .iter()
                .flat_map(|&m| params.iter().map(move |&p| (Some(m), p)))
                .collect())
        }
        _ => Err(unknown()),
    }
}

/// Returns `config` with every addressed parameter scaled by its multiplier.
pub fn apply(psi: &DynamicsVector, config: &ArenaConfig) -> Result<ArenaConfig, NonstationarityError> {
    let mut out = config.clone();
    for (path, &mult) in psi {
        if !(mult.is_finite() && mult > 0.0) {
            return Err(NonstationarityError::InvariantViolation(format!(
                "multiplier {mult} for `{path}` must be positive"
            )));
        }
        for (module, param) in resolve(path, config)? {
            let slot = match (module, param) {
                (_, Param::TorsionalStiffness) => &mut out.knob.torsional_stiffness,
                (_, Param::RotationalFriction) => &mut out.knob.rotational_friction,
                (Some(m), Param::Hinge(k)) => &mut out.modules[m].material.hinge_stiffness[k],
                (Some(m), Param::LinkAxial) => &mut out.modules[m].material.link_axial_stiffness,
                (Some(m), Param::CreepRate) => &mut out.modules[m].material.creep_rate,
                (Some(m), Param::TransitionNoise) => &mut out.modules[m].material.transition_noise,
                (None, _) => unreachable!("module parameters always carry an index"),
            };
            *slot *= mult;
        }
    }
    for (i, m) in out.modules.iter().enumerate() {
        m.material
            .validate()
            .map_err(|e| NonstationarityError::InvariantViolation(format!("module {i}: {e}")))?;
    }
    out.knob.validate().map_err(NonstationarityError::InvariantViolation)?;
    Ok(out)
}

/// Result of one environment step under drifting dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    /// Deepest tip penetration over the primitive's sub-steps.
    pub max_penetration: f64,
    pub dynamics: DynamicsVector,
}

/// Executes `action` at step `t` under the dynamics the schedules give.
pub fn step_world(
    state: &mut ArenaState,
    config: &ArenaConfig,
    schedules: &[Schedule],
    action: SweepAction,
    t: u64,
    ledger: &mut UptimeLedger,
) -> Result<WorldStep, NonstationarityError> {
    let dynamics = dynamics_at(schedules, t);
    let effective = apply(&dynamics, config)?;
    let report = execute_primitive(state, action, &effective, ledger)?;
    let (done, success) = state.is_done(&effective);
    Ok(WorldStep {
        observation: state.observe(&effective),
        reward: state.reward(&effective),
        done,
        success,
        max_penetration: report
            .substeps
            .iter()
            .map(|s| s.max_penetration)
            .fold(f64::NEG_INFINITY, f64::max),
        dynamics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_is_inclusive_at_event() {
        let j = ScheduleKind::Jump {
            events: vec![JumpEvent {
                step: 100,
                multiplier: 0.5,
            }],
        };
        assert_eq!(j.evaluate(99), 1.0);
        assert_eq!(j.evaluate(100), 0.5);
        assert_eq!(j.evaluate(10_000), 0.5);
    }

    #[test]
    fn trend_clamps() {
        let t = ScheduleKind::Trend {
            kind: TrendKind::Linear,
            rate: 0.01,
            floor: None,
            ceiling: Some(1.5),
        };
        assert_eq!(t.evaluate(10), 1.1);
        assert_eq!(t.evaluate(1000), 1.5);
        let e = ScheduleKind::Trend {
            kind: TrendKind::Exponential,
            rate: -0.1,
            floor: Some(0.5),
            ceiling: None,
        };
        assert!((e.evaluate(2) - 0.81).abs() < 1e-15);
        assert_eq!(e.evaluate(100), 0.5);
    }

    #[test]
    fn path_resolution() {
        let c = ArenaConfig::default();
        assert_eq!(
            resolve("module.1.material.hinge_stiffness.k2", &c).unwrap(),
            vec![(Some(1), Param::Hinge(1))]
        );
        assert_eq!(resolve("module.*.material.hinge_stiffness.*", &c).unwrap().len(), 9);
        for bad in [
            "module.3.material.creep_rate",
            "module.0.material.hinge_stiffness.k4",
            "knob.mass",
            "",
        ] {
            assert!(
                matches!(resolve(bad, &c), Err(NonstationarityError::UnknownPath(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn invalid_schedules() {
        let bad = [
            ScheduleKind::Cyclic {
                amplitude: 0.1,
                period: 0,
                phase: 0.0,
            },
            ScheduleKind::Jump {
                events: vec![
                    JumpEvent {
                        step: 5,
                        multiplier: 1.0,
                    },
                    JumpEvent {
                        step: 5,
                        multiplier: 2.0,
                    },
                ],
            },
            ScheduleKind::Trend {
                kind: TrendKind::Linear,
                rate: 0.0,
                floor: Some(2.0),
                ceiling: Some(1.0),
            },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }

    #[test]
    fn creep_rate_pushed_to_one_is_rejected() {
        let c = ArenaConfig::default();
        let psi = DynamicsVector::from([("module.0.material.creep_rate".to_string(), 1e6)]);
        assert!(matches!(
            apply(&psi, &c),
            Err(NonstationarityError::InvariantViolation(_))
        ));
    }
}
