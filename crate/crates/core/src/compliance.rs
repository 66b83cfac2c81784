//! Pseudo-rigid-body compliance of a five-bar finger.
//!
//! The proximal links are rigid (they are backed by the servo horns); the
//! three living hinges are linear torsional springs and the two distal links
//! are linear axial springs. With both servos held, the deformed linkage has
//! two independent degrees of freedom, the tip position, from which every
//! hinge angle and link length follows by construction, so loop closure
//! holds for every iterate.
//!
//! Hinge rest angles are stored as offsets from the rigid-linkage hinge
//! angles at the current servo pose. A fresh finger therefore rests exactly
//! on the rigid kinematics; creep moves the offsets and the distal rest
//! lengths toward the loaded shape, which is what produces drift and
//! hysteresis.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{hinge_angles, polygon_orientation, wrap_to_pi, FiveBarGeometry, KinematicsError, TipPose, Vec2};
use crate::solver::{minimize, Evaluation, NewtonOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplianceError {
    #[error("equilibrium solve did not converge after {iterations} iterations (gradient {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("compliance state outside validity envelope: {0}")]
    InvalidState(String),
    #[error("invalid material profile: {0}")]
    InvalidMaterial(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Maximum relative drift of a rest link length before the finger is
/// considered broken.
pub const REST_LENGTH_ENVELOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    pub name: String,
    /// `[k1, k2, k3]` for `[left knee, tip, right knee]`, N·m/rad.
    pub hinge_stiffness: [f64; 3],
    /// Axial stiffness shared by the moving links, N/m.
    pub link_axial_stiffness: f64,
    /// Fraction of the loaded deflection absorbed into the rest shape per step.
    pub creep_rate: f64,
    /// Standard deviation of servo-angle realization noise, rad.
    pub transition_noise: f64,
}

impl MaterialProfile {
    pub fn tpu() -> Self {
        Self {
            name: "tpu".into(),
            hinge_stiffness: [0.5; 3],
            link_axial_stiffness: 2000.0,
            creep_rate: 1e-5,
            transition_noise: 0.002,
        }
    }

    pub fn silicone() -> Self {
        Self {
            name: "silicone".into(),
            hinge_stiffness: [0.05; 3],
            link_axial_stiffness: 200.0,
            creep_rate: 1e-4,
            transition_noise: 0.02,
        }
    }

    /// Looks up one of the reserved profile names.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "tpu" => Some(Self::tpu()),
            "silicone" => Some(Self::silicone()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ComplianceError> {
        let bad = |msg: String| Err(ComplianceError::InvalidMaterial(format!("{}: {msg}", self.name)));
        if self.hinge_stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad(format!(
                "hinge stiffness must be positive, got {:?}",
                self.hinge_stiffness
            ));
        }
        if !(self.link_axial_stiffness.is_finite() && self.link_axial_stiffness > 0.0) {
            return bad(format!(
                "link stiffness must be positive, got {}",
                self.link_axial_stiffness
            ));
        }
        if !(0.0..1.0).contains(&self.creep_rate) {
            return bad(format!("creep rate must lie in [0, 1), got {}", self.creep_rate));
        }
        if !(self.transition_noise.is_finite() && self.transition_noise >= 0.0) {
            return bad(format!(
                "transition noise must be non-negative, got {}",
                self.transition_noise
            ));
        }
        Ok(())
    }

    /// Copy with every stiffness multiplied by `s`.
    pub fn scaled_stiffness(&self, s: f64) -> Self {
        Self {
            hinge_stiffness: self.hinge_stiffness.map(|k| k * s),
            link_axial_stiffness: self.link_axial_stiffness * s,
            ..self.clone()
        }
    }
}

/// History-dependent rest shape of one finger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceState {
    /// Hinge rest angles relative to the rigid-linkage hinge angles, rad.
    pub rest_passive_angles: [f64; 3],
    /// `[left proximal, left distal, right distal, right proximal]`, m.
    pub rest_link_lengths: [f64; 4],
    pub accumulated_steps: u64,
}

impl ComplianceState {
    pub fn nominal(geom: &FiveBarGeometry) -> Self {
        Self {
            rest_passive_angles: [0.0; 3],
            rest_link_lengths: nominal_lengths(geom),
            accumulated_steps: 0,
        }
    }

    pub fn validate(&self, geom: &FiveBarGeometry) -> Result<(), ComplianceError> {
        let nominal = nominal_lengths(geom);
        for (i, (rest, nom)) in self.rest_link_lengths.iter().zip(nominal).enumerate() {
            if !rest.is_finite() || ((rest - nom) / nom).abs() > REST_LENGTH_ENVELOPE {
                return Err(ComplianceError::InvalidState(format!(
                    "rest length of link {i} is {rest:.6} m, nominal {nom:.6} m"
                )));
            }
        }
        if self.rest_passive_angles.iter().any(|a| !a.is_finite()) {
            return Err(ComplianceError::InvalidState("non-finite rest angle".into()));
        }
        Ok(())
    }
}

fn nominal_lengths(geom: &FiveBarGeometry) -> [f64; 4] {
    [
        geom.proximal_length,
        geom.distal_length,
        geom.distal_length,
        geom.proximal_length,
    ]
}

/// The five elastic coordinates of a deformed finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassiveCoords {
    /// Interior hinge angles `[left knee, tip, right knee]`, rad.
    pub hinge_angles: [f64; 3],
    /// `[left proximal, left distal, right distal, right proximal]`, m.
    pub link_lengths: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalForce {
    pub fx: f64,
    pub fy: f64,
}

impl ExternalForce {
    pub fn new(fx: f64, fy: f64) -> Self {
        Self { fx, fy }
    }

    fn to_vec(self) -> Vec2 {
        Vec2::new(self.fx, self.fy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub servo_angles: [f64; 2],
    pub tip: TipPose,
    pub passive_angles: [f64; 3],
    /// Hinge deflections from the rigid-linkage angles, rad.
    pub deflections: [f64; 3],
    pub link_lengths: [f64; 4],
    /// Total potential (elastic energy minus work of the tip force), J.
    pub energy: f64,
    pub initial_energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Elastic energy of a finger at explicit passive coordinates.
///
/// Rest hinge angles are the rigid-linkage angles at `servo_angles` plus
/// the offsets held in `state`.
pub fn elastic_energy(
    geom: &FiveBarGeometry,
    material: &MaterialProfile,
    state: &ComplianceState,
    coords: &PassiveCoords,
    servo_angles: [f64; 2],
) -> Result<f64, KinematicsError> {
    let rigid = geom.passive_joint_angles(servo_angles[0], servo_angles[1])?;
    let hinge: f64 = (0..3)
        .map(|i| {
            let d = wrap_to_pi(coords.hinge_angles[i] - rigid.passive_angles[i]) - state.rest_passive_angles[i];
            0.5 * material.hinge_stiffness[i] * d * d
        })
        .sum();
    let links: f64 = (0..4)
        .map(|j| {
            let d = coords.link_lengths[j] - state.rest_link_lengths[j];
            0.5 * material.link_axial_stiffness * d * d
        })
        .sum();
    Ok(hinge + links)
}

/// A finger with its servos held at fixed angles, as a function of the
/// tip position in the module frame.
#[derive(Debug, Clone)]
pub struct FingerModel {
    bases: [Vec2; 2],
    knees: [Vec2; 2],
    rigid_tip: Vec2,
    /// Distal headings at the rigid tip.
    rigid_heading: [f64; 2],
    /// `+1` when the loop is traversed clockwise (interior angles open
    /// counterclockwise), `-1` otherwise.
    orientation: f64,
    stiffness: [f64; 3],
    axial: f64,
    offsets: [f64; 3],
    rest_distal: [f64; 2],
    /// Constant energy of the rigid proximal links against their rest lengths.
    proximal_energy: f64,
    servo_angles: [f64; 2],
}

/// Energy, gradient and Hessian with respect to the tip position.
#[derive(Debug, Clone, Copy)]
pub struct TipEnergy {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: Matrix2<f64>,
}

impl FingerModel {
    pub fn new(
        geom: &FiveBarGeometry,
        material: &MaterialProfile,
        state: &ComplianceState,
        servo_angles: [f64; 2],
    ) -> Result<Self, KinematicsError> {
        let [t1, t2] = servo_angles;
        let rigid_tip = geom.forward_kinematics(t1, t2)?.to_vec();
        let bases = geom.base_points();
        let knees = geom.knee_points(t1, t2);
        let heading = |k: &Vec2| {
            let v = rigid_tip - k;
            v.y.atan2(v.x)
        };
        let orientation = -polygon_orientation(&[bases[0], knees[0], rigid_tip, knees[1], bases[1]]);
        let proximal_energy = [0usize, 3]
            .iter()
            .map(|&j| {
                let d = geom.proximal_length - state.rest_link_lengths[j];
                0.5 * material.link_axial_stiffness * d * d
            })
            .sum();
        Ok(Self {
            bases,
            knees,
            rigid_tip,
            rigid_heading: [heading(&knees[0]), heading(&knees[1])],
            orientation,
            stiffness: material.hinge_stiffness,
            axial: material.link_axial_stiffness,
            offsets: state.rest_passive_angles,
            rest_distal: [state.rest_link_lengths[1], state.rest_link_lengths[2]],
            proximal_energy,
            servo_angles,
        })
    }

    pub fn rigid_tip(&self) -> Vec2 {
        self.rigid_tip
    }

    pub fn servo_angles(&self) -> [f64; 2] {
        self.servo_angles
    }

    /// Hinge deflections from the rigid-linkage angles (not from rest).
    pub fn deflections(&self, p: &Vec2) -> [f64; 3] {
        let h = self.headings(p);
        let d1 = wrap_to_pi(h[0] - self.rigid_heading[0]);
        let d2 = wrap_to_pi(h[1] - self.rigid_heading[1]);
        let s = self.orientation;
        [s * d1, s * wrap_to_pi(d2 - d1), -s * d2]
    }

    fn headings(&self, p: &Vec2) -> [f64; 2] {
        let v1 = p - self.knees[0];
        let v2 = p - self.knees[1];
        [v1.y.atan2(v1.x), v2.y.atan2(v2.x)]
    }

    pub fn coords(&self, p: &Vec2) -> PassiveCoords {
        let [b1, b2] = self.bases;
        let [k1, k2] = self.knees;
        PassiveCoords {
            hinge_angles: hinge_angles(&b1, &k1, p, &k2, &b2),
            link_lengths: [(k1 - b1).norm(), (p - k1).norm(), (p - k2).norm(), (k2 - b2).norm()],
        }
    }

    pub fn energy(&self, p: &Vec2) -> f64 {
        let defl = self.deflections(p);
        let hinge: f64 = (0..3)
            .map(|i| {
                let d = defl[i] - self.offsets[i];
                0.5 * self.stiffness[i] * d * d
            })
            .sum();
        let links: f64 = (0..2)
            .map(|j| {
                let d = (p - self.knees[j]).norm() - self.rest_distal[j];
                0.5 * self.axial * d * d
            })
            .sum();
        hinge + links + self.proximal_energy
    }

    pub fn energy_derivatives(&self, p: &Vec2) -> TipEnergy {
        let defl = self.deflections(p);
        let s = self.orientation;
        let mut grad_heading = [Vec2::zeros(); 2];
        let mut hess_heading = [Matrix2::zeros(); 2];
        let mut value = self.proximal_energy;
        let mut gradient = Vec2::zeros();
        let mut hessian = Matrix2::zeros();

        for j in 0..2 {
            let v = p - self.knees[j];
            let r2 = v.norm_squared();
            let r = r2.sqrt();
            grad_heading[j] = Vec2::new(-v.y, v.x) / r2;
            let r4 = r2 * r2;
            hess_heading[j] = Matrix2::new(
                2.0 * v.x * v.y,
                v.y * v.y - v.x * v.x,
                v.y * v.y - v.x * v.x,
                -2.0 * v.x * v.y,
            ) / r4;

            let u = v / r;
            let stretch = r - self.rest_distal[j];
            value += 0.5 * self.axial * stretch * stretch;
            gradient += self.axial * stretch * u;
            let uut = u * u.transpose();
            hessian += self.axial * (uut + stretch * (Matrix2::identity() - uut) / r);
        }

        // ∇φ for [left knee, tip, right knee]
        let grads = [
            s * grad_heading[0],
            s * (grad_heading[1] - grad_heading[0]),
            -s * grad_heading[1],
        ];
        let hessians = [
            s * hess_heading[0],
            s * (hess_heading[1] - hess_heading[0]),
            -s * hess_heading[1],
        ];
        for i in 0..3 {
            let d = defl[i] - self.offsets[i];
            let k = self.stiffness[i];
            value += 0.5 * k * d * d;
            gradient += k * d * grads[i];
            hessian += k * (grads[i] * grads[i].transpose() + d * hessians[i]);
        }
        TipEnergy {
            value,
            gradient,
            hessian,
        }
    }

    fn result(&self, p: Vec2, energy: f64, initial: f64, gnorm: f64, iterations: usize) -> EquilibriumResult {
        let coords = self.coords(&p);
        EquilibriumResult {
            servo_angles: self.servo_angles,
            tip: TipPose::from_vec(p),
            passive_angles: coords.hinge_angles,
            deflections: self.deflections(&p),
            link_lengths: coords.link_lengths,
            energy,
            initial_energy: initial,
            gradient_norm: gnorm,
            iterations,
        }
    }

    /// Packages a tip position found by an outer solver.
    pub fn equilibrium_at(&self, p: Vec2, energy: f64, gnorm: f64, iterations: usize) -> EquilibriumResult {
        self.result(p, energy, energy, gnorm, iterations)
    }
}

/// Quasistatic equilibrium of one finger under a tip force.
///
/// Minimizes `E(tip) - F·tip` starting from the rigid-linkage tip.
pub fn solve_equilibrium(
    geom: &FiveBarGeometry,
    material: &MaterialProfile,
    state: &ComplianceState,
    servo_angles: [f64; 2],
    force: ExternalForce,
) -> Result<EquilibriumResult, ComplianceError> {
    state.validate(geom)?;
    let finger = FingerModel::new(geom, material, state, servo_angles)?;
    let f = force.to_vec();
    let eval = |x: &DVector<f64>| {
        let p = Vec2::new(x[0], x[1]);
        let e = finger.energy_derivatives(&p);
        let g = e.gradient - f;
        Evaluation {
            value: e.value - f.dot(&p),
            gradient: DVector::from_column_slice(g.as_slice()),
            hessian: DMatrix::from_column_slice(2, 2, e.hessian.as_slice()),
        }
    };
    let value = |x: &DVector<f64>| {
        let p = Vec2::new(x[0], x[1]);
        finger.energy(&p) - f.dot(&p)
    };
    let p0 = finger.rigid_tip();
    let out = minimize(
        eval,
        value,
        DVector::from_column_slice(p0.as_slice()),
        NewtonOptions::default(),
    );
    if !out.converged {
        return Err(ComplianceError::NonConvergence {
            iterations: out.iterations,
            gradient_norm: out.gradient_norm,
        });
    }
    let p = Vec2::new(out.x[0], out.x[1]);
    Ok(finger.result(p, out.value, out.initial_value, out.gradient_norm, out.iterations))
}

/// Relaxes the rest shape toward the current equilibrium:
/// `rest ← (1 − λ)·rest + λ·current`.
pub fn apply_creep(
    state: &ComplianceState,
    current: &EquilibriumResult,
    material: &MaterialProfile,
) -> ComplianceState {
    let lambda = material.creep_rate;
    let mut next = state.clone();
    for i in 0..3 {
        next.rest_passive_angles[i] = (1.0 - lambda) * state.rest_passive_angles[i] + lambda * current.deflections[i];
    }
    for j in 0..4 {
        next.rest_link_lengths[j] = (1.0 - lambda) * state.rest_link_lengths[j] + lambda * current.link_lengths[j];
    }
    next.accumulated_steps += 1;
    next
}

/// One sample of a force-displacement trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSample {
    pub force: f64,
    pub displacement: f64,
}

/// Force-displacement trace of a finger under a triangular load cycle
/// `0 → +A → 0 → −A → 0` applied along `direction`.
#[derive(Debug, Clone)]
pub struct LoadLoop {
    pub samples: Vec<LoadSample>,
    pub final_state: ComplianceState,
}

impl LoadLoop {
    /// Work done on the finger around the cycle, `∮ F dx`, by the trapezoid
    /// rule. Positive when the unloading path lags the loading path.
    pub fn area(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[0].force + w[1].force) * (w[1].displacement - w[0].displacement))
            .sum()
    }
}

/// Runs a cyclic load on a finger with servos held, applying creep after
/// every step. `steps` must be a multiple of 4.
pub fn cyclic_loading(
    geom: &FiveBarGeometry,
    material: &MaterialProfile,
    initial: &ComplianceState,
    servo_angles: [f64; 2],
    amplitude: f64,
    direction: f64,
    steps: usize,
) -> Result<LoadLoop, ComplianceError> {
    assert!(
        steps.is_multiple_of(4) && steps > 0,
        "steps must be a positive multiple of 4"
    );
    let quarter = (steps / 4) as i64;
    let dir = Vec2::new(direction.cos(), direction.sin());
    let rigid = geom.forward_kinematics(servo_angles[0], servo_angles[1])?.to_vec();
    let mut state = initial.clone();
    let mut samples = Vec::with_capacity(steps + 1);
    for t in 0..=steps as i64 {
        // triangular wave with exact integer phase
        let level = if t <= quarter {
            t
        } else if t <= 3 * quarter {
            2 * quarter - t
        } else {
            t - 4 * quarter
        };
        let force = amplitude * level as f64 / quarter as f64;
        let f = force * dir;
        let eq = solve_equilibrium(geom, material, &state, servo_angles, ExternalForce::new(f.x, f.y))?;
        samples.push(LoadSample {
            force,
            displacement: (eq.tip.to_vec() - rigid).dot(&dir),
        });
        state = apply_creep(&state, &eq, material);
    }
    Ok(LoadLoop {
        samples,
        final_state: state,
    })
}
