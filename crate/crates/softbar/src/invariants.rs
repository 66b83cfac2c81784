//! Per-step state invariants checked during long runs.

use std::f64::consts::PI;

use softbar_core::arena::{ArenaConfig, ArenaState};
use softbar_core::nonstationarity::WorldStep;

/// Slack on bounds that hold exactly in exact arithmetic.
pub const ROUNDOFF: f64 = 1e-12;

/// A failed check: the invariant name and what was observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

fn fail(invariant: &'static str, detail: String) -> Result<(), Violation> {
    Err(Violation { invariant, detail })
}

pub fn check_step(config: &ArenaConfig, state: &ArenaState, step: &WorldStep) -> Result<(), Violation> {
    let n = config.n_servos();
    let obs = &step.observation;
    if obs.len() != n + 2 || obs.iter().any(|v| !v.is_finite()) {
        return fail("observation_bounds", format!("malformed observation {obs:?}"));
    }
    if let Some((i, v)) = obs[..n].iter().enumerate().find(|(_, v)| v.abs() > 1.0 + ROUNDOFF) {
        return fail("observation_bounds", format!("servo feature {i} = {v}"));
    }
    let unit = obs[n] * obs[n] + obs[n + 1] * obs[n + 1];
    if (unit - 1.0).abs() > ROUNDOFF {
        return fail("observation_bounds", format!("cos² + sin² = {unit}"));
    }
    for (i, m) in config.modules.iter().enumerate() {
        for s in 0..2 {
            let lim = m.geometry.servo_limits[s];
            let a = state.servo_angles[2 * i + s];
            if a < lim.min - ROUNDOFF || a > lim.max + ROUNDOFF {
                return fail(
                    "servo_limits",
                    format!("servo {} at {a} outside [{}, {}]", 2 * i + s, lim.min, lim.max),
                );
            }
        }
    }
    let bound = config.knob.lobe_half_width / 10.0;
    if !(step.max_penetration < bound) {
        return fail(
            "penetration_bound",
            format!("penetration {:.3e} m not below {bound:.3e} m", step.max_penetration),
        );
    }
    if !(step.reward >= -5.0 * PI - ROUNDOFF && step.reward <= 60.0) {
        return fail("reward_bounds", format!("reward {} outside [-5π, 60]", step.reward));
    }
    Ok(())
}
