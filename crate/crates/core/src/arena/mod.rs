//! The knob-turning arena: five-bar modules around a lobed knob, coupled
//! through tip contact and solved quasistatically.

mod knob;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use knob::{ContactDerivatives, KnobSpec};

use crate::compliance::{apply_creep, ComplianceError, ComplianceState, FingerModel, MaterialProfile};
use crate::geometry::{wrap_to_pi, FiveBarGeometry, KinematicsError, TipPose, Vec2};
use crate::solver::{minimize, Evaluation, NewtonOptions};

use knob::rotate;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("invalid arena config: {0}")]
    InvalidConfig(String),
    #[error("solver failure in module {module}: {source}")]
    SolverFailure {
        module: usize,
        #[source]
        source: ComplianceError,
    },
    #[error("joint knob solve did not converge (gradient {gradient_norm:.3e})")]
    JointNonConvergence { gradient_norm: f64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// One five-bar module placed around the knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMount {
    /// World position of the module-frame origin (midpoint of the servo axes).
    pub mount_position: [f64; 2],
    /// World angle of the module-frame `+x` axis. The module's `+y` axis is
    /// the extend direction.
    pub mount_orientation: f64,
    pub geometry: FiveBarGeometry,
    pub material: MaterialProfile,
    /// Tip position of the retracted home pose in the module frame.
    pub home_tip: [f64; 2],
}

impl ModuleMount {
    /// Module at polar angle `azimuth`, `radius` from the knob axis, facing it.
    pub fn facing_center(azimuth: f64, radius: f64, material: MaterialProfile) -> Self {
        Self {
            mount_position: [radius * azimuth.cos(), radius * azimuth.sin()],
            mount_orientation: azimuth + PI / 2.0,
            geometry: FiveBarGeometry::default(),
            material,
            home_tip: DEFAULT_HOME_TIP,
        }
    }

    pub fn to_world(&self, p: &Vec2) -> Vec2 {
        Vec2::new(self.mount_position[0], self.mount_position[1]) + rotate(p, self.mount_orientation)
    }

    pub fn home_servo_angles(&self) -> Result<[f64; 2], KinematicsError> {
        let (a, b) = self
            .geometry
            .inverse_kinematics(TipPose::new(self.home_tip[0], self.home_tip[1]))?;
        Ok([a, b])
    }
}

pub const DEFAULT_MOUNT_RADIUS: f64 = 0.155;
pub const DEFAULT_HOME_TIP: [f64; 2] = [0.0, 0.085];
/// Azimuth of module 0; the others follow at equal spacing.
pub const DEFAULT_FIRST_AZIMUTH: f64 = -11.0 * PI / 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    pub modules: Vec<ModuleMount>,
    pub knob: KnobSpec,
    pub max_episode_steps: u32,
    pub success_threshold: f64,
    pub coarse_threshold: f64,
    /// N/m.
    pub contact_penalty_stiffness: f64,
    /// Tip displacement of one tip-level action, m.
    pub tip_step_size: f64,
    /// Interpolated servo sub-steps per tip action.
    pub substeps: usize,
    /// Servo delta of one low-level action, rad.
    pub angular_resolution: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self::with_material(MaterialProfile::tpu())
    }
}

impl ArenaConfig {
    /// Default three-module layout with every finger made of `material`.
    pub fn with_material(material: MaterialProfile) -> Self {
        let modules = (0..3)
            .map(|i| {
                ModuleMount::facing_center(
                    DEFAULT_FIRST_AZIMUTH + 2.0 * PI * i as f64 / 3.0,
                    DEFAULT_MOUNT_RADIUS,
                    material.clone(),
                )
            })
            .collect();
        Self {
            modules,
            knob: KnobSpec::default(),
            max_episode_steps: 40,
            success_threshold: 0.10 / PI,
            coarse_threshold: 0.25 / PI,
            contact_penalty_stiffness: 1e6,
            tip_step_size: 0.025,
            substeps: 8,
            angular_resolution: 0.05,
        }
    }

    pub fn n_modules(&self) -> usize {
        self.modules.len()
    }

    pub fn n_servos(&self) -> usize {
        2 * self.modules.len()
    }

    pub fn n_actions(&self) -> usize {
        2 * self.modules.len()
    }

    pub fn observation_dim(&self) -> usize {
        2 * self.modules.len() + 2
    }

    /// Copy with every module's material replaced.
    pub fn set_material(&mut self, material: &MaterialProfile) {
        for m in &mut self.modules {
            m.material = material.clone();
        }
    }

    /// Copy with all transition noise removed.
    pub fn noiseless(mut self) -> Self {
        for m in &mut self.modules {
            m.material.transition_noise = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<(), ArenaError> {
        let bad = |msg: String| Err(ArenaError::InvalidConfig(msg));
        if self.modules.is_empty() {
            return bad("at least one module is required".into());
        }
        self.knob.validate().map_err(ArenaError::InvalidConfig)?;
        if !(self.success_threshold > 0.0 && self.success_threshold < self.coarse_threshold) {
            return bad(format!(
                "thresholds must satisfy 0 < success ({}) < coarse ({})",
                self.success_threshold, self.coarse_threshold
            ));
        }
        if !(self.contact_penalty_stiffness > 0.0) {
            return bad("contact_penalty_stiffness must be positive".into());
        }
        if !(self.tip_step_size > 0.0 && self.angular_resolution > 0.0) || self.substeps == 0 {
            return bad("tip_step_size, angular_resolution and substeps must be positive".into());
        }
        if self.max_episode_steps == 0 {
            return bad("max_episode_steps must be positive".into());
        }
        for (i, m) in self.modules.iter().enumerate() {
            m.geometry
                .validate()
                .map_err(|e| ArenaError::InvalidConfig(format!("module {i}: {e}")))?;
            m.material
                .validate()
                .map_err(|e| ArenaError::InvalidConfig(format!("module {i}: {e}")))?;
            m.home_servo_angles()
                .map_err(|e| ArenaError::InvalidConfig(format!("module {i} home pose: {e}")))?;
            if !self.module_reaches_knob(m) {
                return bad(format!("module {i} cannot reach the lobe annulus"));
            }
        }
        Ok(())
    }

    /// Samples the servo box and checks that some tip lands between the hub
    /// and the lobe ends.
    fn module_reaches_knob(&self, m: &ModuleMount) -> bool {
        let [l1, l2] = m.geometry.servo_limits;
        let n = 24;
        (0..=n).any(|i| {
            (0..=n).any(|j| {
                let a = l1.min + l1.span() * i as f64 / n as f64;
                let b = l2.min + l2.span() * j as f64 / n as f64;
                m.geometry.forward_kinematics(a, b).is_ok_and(|tip| {
                    let r = m.to_world(&tip.to_vec()).norm();
                    r > self.knob.hub_radius && r < self.knob.reach()
                })
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArenaState {
    /// `[module0 left, module0 right, module1 left, ...]`, rad.
    pub servo_angles: Vec<f64>,
    /// Unwrapped knob angle, rad.
    pub knob_angle: f64,
    /// Rest angle of the torsional knob spring for the current primitive.
    pub knob_anchor: f64,
    pub compliance_states: Vec<ComplianceState>,
    /// Equilibrium tips in each module frame.
    pub tips: Vec<Vec2>,
    pub step_count: u32,
    pub rng: ChaCha8Rng,
}

/// Diagnostics of one quasistatic sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubstepReport {
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_penetration: f64,
    pub knob_released: bool,
    pub any_contact: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Reward of a knob offset `delta` from the goal (wrapped to `[-π, π]`).
///
/// Both bonuses are inclusive: the coarse bonus applies within
/// `coarse_threshold` and the success bonus within `success_threshold`.
pub fn reward_for_offset(delta: f64, config: &ArenaConfig) -> f64 {
    let d = wrap_to_pi(delta).abs();
    let mut r = -5.0 * d;
    if d <= config.coarse_threshold {
        r += 10.0;
    }
    if d <= config.success_threshold {
        r += 50.0;
    }
    r
}

impl ArenaState {
    pub fn reset(config: &ArenaConfig, seed: u64) -> Result<Self, ArenaError> {
        config.validate()?;
        let mut servo_angles = Vec::with_capacity(config.n_servos());
        let mut tips = Vec::with_capacity(config.n_modules());
        for m in &config.modules {
            let [a, b] = m.home_servo_angles()?;
            servo_angles.extend([a, b]);
            tips.push(m.geometry.forward_kinematics(a, b)?.to_vec());
        }
        Ok(Self {
            servo_angles,
            knob_angle: config.knob.start_angle,
            knob_anchor: config.knob.start_angle,
            compliance_states: config
                .modules
                .iter()
                .map(|m| ComplianceState::nominal(&m.geometry))
                .collect(),
            tips,
            step_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn module_servos(&self, module: usize) -> [f64; 2] {
        [self.servo_angles[2 * module], self.servo_angles[2 * module + 1]]
    }

    /// Equilibrium tip of `module` in world coordinates.
    pub fn world_tip(&self, config: &ArenaConfig, module: usize) -> Vec2 {
        config.modules[module].to_world(&self.tips[module])
    }

    pub fn knob_offset(&self, config: &ArenaConfig) -> f64 {
        wrap_to_pi(self.knob_angle - config.knob.goal_angle)
    }

    pub fn observe(&self, config: &ArenaConfig) -> Vec<f64> {
        let mut obs = Vec::with_capacity(config.observation_dim());
        for (i, m) in config.modules.iter().enumerate() {
            for s in 0..2 {
                obs.push(m.geometry.servo_limits[s].normalize(self.servo_angles[2 * i + s]));
            }
        }
        let (sin, cos) = self.knob_angle.sin_cos();
        obs.push(cos);
        obs.push(sin);
        obs
    }

    pub fn reward(&self, config: &ArenaConfig) -> f64 {
        reward_for_offset(self.knob_angle - config.knob.goal_angle, config)
    }

    /// `(done, success)`.
    pub fn is_done(&self, config: &ArenaConfig) -> (bool, bool) {
        let success = self.knob_offset(config).abs() <= config.success_threshold;
        (success || self.step_count >= config.max_episode_steps, success)
    }

    /// Deepest fingertip penetration into the knob.
    pub fn max_penetration(&self, config: &ArenaConfig) -> f64 {
        (0..config.n_modules())
            .map(|i| config.knob.penetration(&self.world_tip(config, i), self.knob_angle))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Commands new servo targets and settles the arena.
    ///
    /// Targets are clamped to the servo limits; each realized angle receives
    /// Gaussian noise with the module material's `transition_noise`. The
    /// fingers are first settled against a frozen knob; if the resulting
    /// torque on the knob exceeds the breakaway friction, the knob is
    /// released and fingers and knob are settled jointly with the friction
    /// torque opposing the motion. Creep is applied to every finger last.
    pub fn set_servo_targets(&mut self, config: &ArenaConfig, targets: &[f64]) -> Result<SubstepReport, ArenaError> {
        assert_eq!(targets.len(), config.n_servos(), "one target per servo");
        let n = config.n_modules();
        let mut realized = Vec::with_capacity(2 * n);
        for (i, m) in config.modules.iter().enumerate() {
            let sigma = m.material.transition_noise;
            for s in 0..2 {
                let lim = m.geometry.servo_limits[s];
                let mut a = lim.clamp(targets[2 * i + s]);
                if sigma > 0.0 {
                    let noise = Normal::new(0.0, sigma).expect("finite sigma");
                    a = lim.clamp(a + noise.sample(&mut self.rng));
                }
                realized.push(a);
            }
        }

        let mut fingers = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n);
        for (i, m) in config.modules.iter().enumerate() {
            let servo = [realized[2 * i], realized[2 * i + 1]];
            let finger = FingerModel::new(&m.geometry, &m.material, &self.compliance_states[i], servo)?;
            let old = self.module_servos(i);
            let old_rigid = m.geometry.forward_kinematics(old[0], old[1])?.to_vec();
            start.push(self.tips[i] + (finger.rigid_tip() - old_rigid));
            fingers.push(finger);
        }

        let solve = JointProblem {
            config,
            fingers: &fingers,
            knob_prev: self.knob_angle,
            anchor: self.knob_anchor,
        };
        let (tips, knob_angle, mut report) = solve.run(&start)?;

        for (i, m) in config.modules.iter().enumerate() {
            let e = fingers[i].energy(&tips[i]);
            let eq = fingers[i].equilibrium_at(tips[i], e, report.gradient_norm, report.iterations);
            self.compliance_states[i] = apply_creep(&self.compliance_states[i], &eq, &m.material);
        }
        self.servo_angles = realized;
        self.tips = tips;
        self.knob_angle = knob_angle;
        report.max_penetration = self.max_penetration(config);
        Ok(report)
    }
}

/// Initial `u` of the released solve; the knob starts `RELEASE_SEED²` rad
/// off its held angle.
const RELEASE_SEED: f64 = 1e-4;

/// Fingers with held servos plus the knob, for one sub-step.
struct JointProblem<'a> {
    config: &'a ArenaConfig,
    fingers: &'a [FingerModel],
    knob_prev: f64,
    anchor: f64,
}

impl JointProblem<'_> {
    fn finger_objective(&self, i: usize, p: &Vec2, angle: f64) -> (f64, Vec2, nalgebra::Matrix2<f64>, f64) {
        let m = &self.config.modules[i];
        let e = self.fingers[i].energy_derivatives(p);
        let pw = m.to_world(p);
        let c = self
            .config
            .knob
            .contact_derivatives(&pw, angle, self.config.contact_penalty_stiffness);
        // module frame → world is a rotation, so pull gradients back with Rᵀ
        let rot = knob::rotation(m.mount_orientation);
        let gw = Vec2::new(c.gradient.x, c.gradient.y);
        let hw = c.hessian.fixed_view::<2, 2>(0, 0).into_owned();
        (
            e.value + c.value,
            e.gradient + rot.transpose() * gw,
            e.hessian + rot.transpose() * hw * rot,
            c.gradient.z,
        )
    }

    fn finger_value(&self, i: usize, p: &Vec2, angle: f64) -> f64 {
        let m = &self.config.modules[i];
        self.fingers[i].energy(p)
            + self
                .config
                .knob
                .contact_energy(&m.to_world(p), angle, self.config.contact_penalty_stiffness)
    }

    fn knob_spring(&self, angle: f64) -> f64 {
        let d = angle - self.anchor;
        0.5 * self.config.knob.torsional_stiffness * d * d
    }

    fn total_energy(&self, tips: &[Vec2], angle: f64) -> f64 {
        tips.iter()
            .enumerate()
            .map(|(i, p)| self.finger_value(i, p, angle))
            .sum::<f64>()
            + self.knob_spring(angle)
    }

    fn run(&self, start: &[Vec2]) -> Result<(Vec<Vec2>, f64, SubstepReport), ArenaError> {
        let opts = NewtonOptions::default();
        let theta0 = self.knob_prev;
        let initial_energy = self.total_energy(start, theta0);
        let mut iterations = 0;
        let mut gnorm: f64 = 0.0;

        // Fingers against a frozen knob decouple.
        let mut tips = Vec::with_capacity(start.len());
        for (i, p0) in start.iter().enumerate() {
            let eval = |x: &DVector<f64>| {
                let (v, g, h, _) = self.finger_objective(i, &Vec2::new(x[0], x[1]), theta0);
                Evaluation {
                    value: v,
                    gradient: DVector::from_column_slice(g.as_slice()),
                    hessian: DMatrix::from_column_slice(2, 2, h.as_slice()),
                }
            };
            let value = |x: &DVector<f64>| self.finger_value(i, &Vec2::new(x[0], x[1]), theta0);
            let out = minimize(eval, value, DVector::from_column_slice(p0.as_slice()), opts);
            if !out.converged {
                return Err(ArenaError::SolverFailure {
                    module: i,
                    source: ComplianceError::NonConvergence {
                        iterations: out.iterations,
                        gradient_norm: out.gradient_norm,
                    },
                });
            }
            iterations += out.iterations;
            gnorm = gnorm.max(out.gradient_norm);
            tips.push(Vec2::new(out.x[0], out.x[1]));
        }

        let knob = &self.config.knob;
        let mut any_contact = false;
        let mut torque = knob.torsional_stiffness * (theta0 - self.anchor);
        for (i, p) in tips.iter().enumerate() {
            let (_, _, _, ga) = self.finger_objective(i, p, theta0);
            if ga != 0.0 {
                any_contact = true;
            }
            torque += ga;
        }

        let mut report = SubstepReport {
            initial_energy,
            any_contact,
            ..Default::default()
        };
        if torque.abs() <= knob.rotational_friction {
            report.final_energy = self.total_energy(&tips, theta0);
            report.iterations = iterations;
            report.gradient_norm = gnorm;
            return Ok((tips, theta0, report));
        }

        // Released: the knob moves in `direction`, against the torque. The
        // angle is written θ₀ + direction·u², which keeps the motion one-sided
        // and turns the friction work f·|θ − θ₀| into the smooth term f·u².
        let direction = -torque.signum();
        let friction = knob.rotational_friction;
        let n = tips.len();
        let dim = 2 * n + 1;
        let angle_of = |u: f64| theta0 + direction * u * u;
        let eval = |x: &DVector<f64>| {
            let u = x[2 * n];
            let angle = angle_of(u);
            let mut value = self.knob_spring(angle) + friction * u * u;
            let mut g = DVector::zeros(dim);
            let mut h = DMatrix::zeros(dim, dim);
            // derivatives in the angle first, mapped to u at the end
            let mut g_angle = knob.torsional_stiffness * (angle - self.anchor);
            let mut h_angle = knob.torsional_stiffness;
            for i in 0..n {
                let p = Vec2::new(x[2 * i], x[2 * i + 1]);
                let m = &self.config.modules[i];
                let fe = self.fingers[i].energy_derivatives(&p);
                let c = knob.contact_derivatives(&m.to_world(&p), angle, self.config.contact_penalty_stiffness);
                value += fe.value + c.value;
                let rot = knob::rotation(m.mount_orientation);
                let rt = rot.transpose();
                let gp = fe.gradient + rt * Vec2::new(c.gradient.x, c.gradient.y);
                let hpp = fe.hessian + rt * c.hessian.fixed_view::<2, 2>(0, 0) * rot;
                let hpa = rt * Vec2::new(c.hessian[(0, 2)], c.hessian[(1, 2)]) * (2.0 * direction * u);
                g[2 * i] = gp.x;
                g[2 * i + 1] = gp.y;
                g_angle += c.gradient.z;
                h_angle += c.hessian[(2, 2)];
                for r in 0..2 {
                    for s in 0..2 {
                        h[(2 * i + r, 2 * i + s)] = hpp[(r, s)];
                    }
                    h[(2 * i + r, 2 * n)] = hpa[r];
                    h[(2 * n, 2 * i + r)] = hpa[r];
                }
            }
            g[2 * n] = 2.0 * u * (direction * g_angle + friction);
            h[(2 * n, 2 * n)] = 4.0 * u * u * h_angle + 2.0 * (direction * g_angle + friction);
            Evaluation {
                value,
                gradient: g,
                hessian: h,
            }
        };
        let value = |x: &DVector<f64>| {
            let u = x[2 * n];
            let ps: Vec<Vec2> = (0..n).map(|i| Vec2::new(x[2 * i], x[2 * i + 1])).collect();
            self.total_energy(&ps, angle_of(u)) + friction * u * u
        };
        let mut x0 = DVector::zeros(dim);
        for (i, p) in tips.iter().enumerate() {
            x0[2 * i] = p.x;
            x0[2 * i + 1] = p.y;
        }
        x0[2 * n] = RELEASE_SEED;
        let out = minimize(eval, value, x0, opts);
        if !out.converged {
            return Err(ArenaError::JointNonConvergence {
                gradient_norm: out.gradient_norm,
            });
        }
        let angle = angle_of(out.x[2 * n]);
        let released: Vec<Vec2> = (0..n).map(|i| Vec2::new(out.x[2 * i], out.x[2 * i + 1])).collect();
        report.final_energy = self.total_energy(&released, angle);
        report.knob_released = angle != theta0;
        report.iterations = iterations + out.iterations;
        report.gradient_norm = gnorm.max(out.gradient_norm);
        Ok((released, angle, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ArenaConfig::default().validate().unwrap();
    }

    #[test]
    fn reset_is_deterministic() {
        let c = ArenaConfig::default();
        assert_eq!(ArenaState::reset(&c, 7).unwrap(), ArenaState::reset(&c, 7).unwrap());
    }

    #[test]
    fn reset_observation_encodes_start_angle() {
        let c = ArenaConfig::default();
        let s = ArenaState::reset(&c, 0).unwrap();
        let obs = s.observe(&c);
        assert_eq!(obs.len(), c.observation_dim());
        let n = obs.len();
        assert_eq!(obs[n - 2], c.knob.start_angle.cos());
        assert_eq!(obs[n - 1], c.knob.start_angle.sin());
    }

    #[test]
    fn reset_at_goal_rewards_sixty() {
        let mut c = ArenaConfig::default();
        c.knob.start_angle = 0.0;
        let s = ArenaState::reset(&c, 0).unwrap();
        assert_eq!(s.reward(&c), 60.0);
        assert_eq!(s.is_done(&c), (true, true));
    }

    #[test]
    fn reward_examples() {
        let c = ArenaConfig::default();
        assert_eq!(reward_for_offset(0.0, &c), 60.0);
        assert!((reward_for_offset(PI, &c) + 5.0 * PI).abs() < 1e-12);
        assert!((reward_for_offset(0.05, &c) - 9.75).abs() < 1e-12);
        assert!((reward_for_offset(-0.05, &c) - 9.75).abs() < 1e-12);
    }

    #[test]
    fn done_flags() {
        let c = ArenaConfig::default();
        let mut s = ArenaState::reset(&c, 0).unwrap();
        s.knob_angle = 1.0;
        assert_eq!(s.is_done(&c), (false, false));
        s.step_count = c.max_episode_steps;
        assert_eq!(s.is_done(&c), (true, false));
    }

    #[test]
    fn observation_endpoints() {
        let c = ArenaConfig::default();
        let mut s = ArenaState::reset(&c, 0).unwrap();
        let lim = c.modules[0].geometry.servo_limits[0];
        s.servo_angles[0] = lim.min;
        s.servo_angles[1] = lim.mid();
        s.knob_angle = PI / 2.0;
        let obs = s.observe(&c);
        assert_eq!(obs[0], -1.0);
        assert_eq!(obs[1], 0.0);
        let n = obs.len();
        assert!(obs[n - 2].abs() < 1e-12 && (obs[n - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holding_targets_without_contact_is_a_fixed_point() {
        let c = ArenaConfig::default().noiseless();
        let mut s = ArenaState::reset(&c, 0).unwrap();
        let before = s.clone();
        let targets = s.servo_angles.clone();
        let report = s.set_servo_targets(&c, &targets).unwrap();
        assert!(!report.any_contact);
        assert_eq!(s.servo_angles, before.servo_angles);
        assert_eq!(s.knob_angle, before.knob_angle);
        for (a, b) in s.tips.iter().zip(&before.tips) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ArenaConfig::default();
        c.success_threshold = c.coarse_threshold;
        assert!(matches!(ArenaState::reset(&c, 0), Err(ArenaError::InvalidConfig(_))));
        let mut c = ArenaConfig::default();
        c.modules.clear();
        assert!(c.validate().is_err());
        let mut c = ArenaConfig::default();
        c.knob.n_lobes = 0;
        assert!(c.validate().is_err());
    }
}
