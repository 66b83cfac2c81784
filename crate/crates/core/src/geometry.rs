//! Rigid-body kinematics of a symmetric planar five-bar.
//!
//! The module frame has its origin midway between the two servo axes with
//! `+x` pointing from the left servo to the right servo and `+y` pointing
//! out of the module toward the workspace. The left servo angle is measured
//! counterclockwise from `+x`; the right servo angle is measured clockwise
//! from `-x`. With this mirror convention the configuration `θ1 == θ2` is
//! symmetric about the `y` axis and swapping the two angles mirrors the tip.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_to_2pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}

/// Left perpendicular `(-y, x)`.
#[inline]
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("knee circles do not intersect (knee distance {distance:.6} m)")]
    Unreachable { distance: f64 },
    #[error("knee points coincide; tip position is undetermined")]
    Degenerate,
    #[error("tip ({x:.6}, {y:.6}) lies outside the reachable workspace")]
    OutOfWorkspace { x: f64, y: f64 },
    #[error("servo {servo} angle {angle:.6} rad outside [{min:.6}, {max:.6}]")]
    LimitViolation {
        servo: usize,
        angle: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// Closed angular interval a servo may be commanded over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoLimits {
    pub min: f64,
    pub max: f64,
}

impl ServoLimits {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.min && angle <= self.max
    }

    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.min, self.max)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// Affine map of `[min, max]` onto `[-1, 1]`.
    pub fn normalize(&self, angle: f64) -> f64 {
        (2.0 * (angle - self.min) / self.span() - 1.0).clamp(-1.0, 1.0)
    }
}

/// Which of the two circle intersections the linkage assembles into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Tip on the left of the directed knee chord `knee_1 → knee_2`.
    TipUp,
    /// Tip on the right of the directed knee chord.
    TipDown,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::TipUp => 1.0,
            Branch::TipDown => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::TipUp => Branch::TipDown,
            Branch::TipDown => Branch::TipUp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipPose {
    pub x: f64,
    pub y: f64,
}

impl TipPose {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vec(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn from_vec(v: Vec2) -> Self {
        Self { x: v.x, y: v.y }
    }

    pub fn distance(&self, other: &TipPose) -> f64 {
        (self.to_vec() - other.to_vec()).norm()
    }
}

/// Servo angles together with the three passive hinge angles
/// `[left knee, tip, right knee]` (interior angles of the closed loop).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfiguration {
    pub servo_angles: [f64; 2],
    pub passive_angles: [f64; 3],
    pub tip: TipPose,
    /// Largest mismatch between a link length and its nominal value.
    pub closure_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiveBarGeometry {
    pub base_separation: f64,
    pub proximal_length: f64,
    pub distal_length: f64,
    pub servo_limits: [ServoLimits; 2],
    pub branch: Branch,
}

impl Default for FiveBarGeometry {
    fn default() -> Self {
        Self {
            base_separation: 0.04,
            proximal_length: 0.06,
            distal_length: 0.08,
            servo_limits: [
                ServoLimits::new(DEFAULT_SERVO_MIN, DEFAULT_SERVO_MAX),
                ServoLimits::new(DEFAULT_SERVO_MIN, DEFAULT_SERVO_MAX),
            ],
            branch: Branch::TipUp,
        }
    }
}

/// Default servo interval. Below `π/2` the knees can cross and the left
/// arm can pass through full extension, which changes the elbow mode.
pub const DEFAULT_SERVO_MIN: f64 = PI / 2.0;
pub const DEFAULT_SERVO_MAX: f64 = 2.8;

impl FiveBarGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [
            ("base_separation", self.base_separation),
            ("proximal_length", self.proximal_length),
            ("distal_length", self.distal_length),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (i, lim) in self.servo_limits.iter().enumerate() {
            if !(lim.min.is_finite() && lim.max.is_finite() && lim.min < lim.max) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "servo {i} limits must satisfy min < max, got [{}, {}]",
                    lim.min, lim.max
                )));
            }
        }
        if !self.workspace_nonempty(16) {
            return Err(KinematicsError::InvalidGeometry(
                "no servo configuration in the limit box assembles".into(),
            ));
        }
        Ok(())
    }

    /// Samples FK over an `n × n` grid of the servo box and reports whether
    /// any configuration assembles.
    pub fn workspace_nonempty(&self, n: usize) -> bool {
        let [l1, l2] = self.servo_limits;
        let n = n.max(2);
        (0..n).any(|i| {
            let a = l1.min + l1.span() * i as f64 / (n - 1) as f64;
            (0..n).any(|j| {
                let b = l2.min + l2.span() * j as f64 / (n - 1) as f64;
                self.forward_kinematics(a, b).is_ok()
            })
        })
    }

    pub fn base_points(&self) -> [Vec2; 2] {
        let h = 0.5 * self.base_separation;
        [Vec2::new(-h, 0.0), Vec2::new(h, 0.0)]
    }

    pub fn knee_points(&self, theta1: f64, theta2: f64) -> [Vec2; 2] {
        let [b1, b2] = self.base_points();
        let l = self.proximal_length;
        [
            b1 + l * Vec2::new(theta1.cos(), theta1.sin()),
            b2 + l * Vec2::new(-theta2.cos(), theta2.sin()),
        ]
    }

    pub fn within_limits(&self, theta1: f64, theta2: f64) -> bool {
        self.servo_limits[0].contains(theta1) && self.servo_limits[1].contains(theta2)
    }

    pub fn clamp_servos(&self, angles: [f64; 2]) -> [f64; 2] {
        [
            self.servo_limits[0].clamp(angles[0]),
            self.servo_limits[1].clamp(angles[1]),
        ]
    }

    /// Tip position as the intersection of the two distal-link circles
    /// centred on the knees, on the side selected by [`Branch`].
    pub fn forward_kinematics(&self, theta1: f64, theta2: f64) -> Result<TipPose, KinematicsError> {
        let [k1, k2] = self.knee_points(theta1, theta2);
        circle_intersection(&k1, &k2, self.distal_length, self.branch).map(TipPose::from_vec)
    }

    /// Servo angles that place the tip at `tip`.
    ///
    /// Each arm has two elbow solutions. The branch-preferred pair (left knee
    /// outboard of `base_1 → tip`, right knee outboard of `base_2 → tip` for
    /// [`Branch::TipUp`]) is tried first; a pair is accepted only if FK with
    /// the configured branch reproduces the tip.
    pub fn inverse_kinematics(&self, tip: TipPose) -> Result<(f64, f64), KinematicsError> {
        let p = tip.to_vec();
        let [b1, b2] = self.base_points();
        let (l1, l2) = (self.proximal_length, self.distal_length);
        let out = KinematicsError::OutOfWorkspace { x: tip.x, y: tip.y };

        let arm = |base: &Vec2| -> Option<(f64, f64)> {
            let d = p - base;
            let r = d.norm();
            if r == 0.0 {
                return None;
            }
            let c = (l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r);
            // Closed workspace: tolerate round-off at full extension/fold.
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&c) {
                return None;
            }
            let heading = d.y.atan2(d.x);
            let spread = c.clamp(-1.0, 1.0).acos();
            Some((heading, spread))
        };
        let (h1, s1) = arm(&b1).ok_or(out.clone())?;
        let (h2, s2) = arm(&b2).ok_or(out.clone())?;

        let sign = self.branch.sign();
        let candidates = [
            (h1 + sign * s1, h2 - sign * s2),
            (h1 + sign * s1, h2 + sign * s2),
            (h1 - sign * s1, h2 - sign * s2),
            (h1 - sign * s1, h2 + sign * s2),
        ];

        let mut limit_err = None;
        for (g1, g2) in candidates {
            let t1 = snap_to_limits(into_interval(g1, &self.servo_limits[0]), &self.servo_limits[0]);
            let t2 = snap_to_limits(into_interval(PI - g2, &self.servo_limits[1]), &self.servo_limits[1]);
            let reproduces = match self.forward_kinematics(t1, t2) {
                Ok(fk) => fk.distance(&tip) < 1e-9,
                Err(_) => false,
            };
            if !reproduces {
                continue;
            }
            for (servo, (angle, lim)) in [(t1, self.servo_limits[0]), (t2, self.servo_limits[1])]
                .into_iter()
                .enumerate()
            {
                if !lim.contains(angle) {
                    limit_err.get_or_insert(KinematicsError::LimitViolation {
                        servo,
                        angle,
                        min: lim.min,
                        max: lim.max,
                    });
                }
            }
            if self.within_limits(t1, t2) {
                return Ok((t1, t2));
            }
        }
        Err(limit_err.unwrap_or(out))
    }

    pub fn workspace_contains(&self, tip: TipPose) -> bool {
        self.inverse_kinematics(tip).is_ok()
    }

    pub fn passive_joint_angles(&self, theta1: f64, theta2: f64) -> Result<JointConfiguration, KinematicsError> {
        let tip = self.forward_kinematics(theta1, theta2)?;
        let [b1, b2] = self.base_points();
        let [k1, k2] = self.knee_points(theta1, theta2);
        let p = tip.to_vec();
        let passive_angles = hinge_angles(&b1, &k1, &p, &k2, &b2);

        let lengths = [
            ((k1 - b1).norm(), self.proximal_length),
            ((p - k1).norm(), self.distal_length),
            ((p - k2).norm(), self.distal_length),
            ((k2 - b2).norm(), self.proximal_length),
        ];
        let closure_residual = lengths
            .iter()
            .map(|(actual, nominal)| (actual - nominal).abs())
            .fold(0.0, f64::max);

        debug_assert!({
            let total = exterior_turning_sum(&[b1, k1, p, k2, b2]);
            (total.abs() - 2.0 * PI).abs() < 1e-9
        });

        Ok(JointConfiguration {
            servo_angles: [theta1, theta2],
            passive_angles,
            tip,
            closure_residual,
        })
    }
}

/// Shifts `angle` by multiples of `2π` into the window starting a little
/// below `lim.min`, so that the nearest representative is tested against the
/// limits.
fn into_interval(angle: f64, lim: &ServoLimits) -> f64 {
    let lo = lim.mid() - PI;
    lo + (angle - lo).rem_euclid(2.0 * PI)
}

/// Pulls angles that miss a limit by round-off back onto it.
fn snap_to_limits(angle: f64, lim: &ServoLimits) -> f64 {
    const EPS: f64 = 1e-12;
    if angle < lim.min && angle > lim.min - EPS {
        lim.min
    } else if angle > lim.max && angle < lim.max + EPS {
        lim.max
    } else {
        angle
    }
}

/// Intersection of two circles of equal radius `radius` around `k1`, `k2`.
pub(crate) fn circle_intersection(k1: &Vec2, k2: &Vec2, radius: f64, branch: Branch) -> Result<Vec2, KinematicsError> {
    let chord = k2 - k1;
    let d = chord.norm();
    if d == 0.0 {
        return Err(KinematicsError::Degenerate);
    }
    let half = 0.5 * d;
    if half > radius {
        return Err(KinematicsError::Unreachable { distance: d });
    }
    let h = (radius * radius - half * half).max(0.0).sqrt();
    let mid = 0.5 * (k1 + k2);
    Ok(mid + branch.sign() * h / d * perp(&chord))
}

/// Interior angles at `[knee_1, tip, knee_2]` of the pentagon
/// `base_1 → knee_1 → tip → knee_2 → base_2`.
///
/// Reflex vertices are reported in `(π, 2π)`. Orientation is detected from
/// the signed area so the result is valid for either branch.
pub fn hinge_angles(b1: &Vec2, k1: &Vec2, p: &Vec2, k2: &Vec2, b2: &Vec2) -> [f64; 3] {
    let orientation = polygon_orientation(&[*b1, *k1, *p, *k2, *b2]);
    let interior = |prev: &Vec2, v: &Vec2, next: &Vec2| -> f64 {
        let a = prev - v;
        let b = next - v;
        // CCW sweep from (prev - v) to (next - v) is the interior angle for a
        // clockwise traversal.
        let ccw = wrap_to_2pi(cross(&a, &b).atan2(a.dot(&b)));
        if orientation < 0.0 {
            ccw
        } else {
            2.0 * PI - ccw
        }
    };
    [interior(b1, k1, p), interior(k1, p, k2), interior(p, k2, b2)]
}

/// `-1` for a clockwise polygon, `+1` for counterclockwise.
pub(crate) fn polygon_orientation(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let area2: f64 = (0..n).map(|i| cross(&vertices[i], &vertices[(i + 1) % n])).sum();
    if area2 < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Signed sum of the exterior turning angles of a closed polygon.
pub fn exterior_turning_sum(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let a = vertices[(i + 1) % n] - vertices[i];
            let b = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            cross(&a, &b).atan2(a.dot(&b))
        })
        .sum()
}
