//! Lobed knob shape and the tip-contact penalty.
//!
//! The knob is a circular hub with `n_lobes` straight prongs. Each prong is
//! a rectangle of width `2·lobe_half_width` running from the knob axis out to
//! `lobe_length`, closed by a semicircular end cap, so its boundary is the
//! offset of a segment and the penalty energy is continuously differentiable.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnobSpec {
    pub n_lobes: usize,
    pub lobe_length: f64,
    pub lobe_half_width: f64,
    pub hub_radius: f64,
    /// N·m/rad; the spring recentres on the knob angle at the start of
    /// every primitive.
    pub torsional_stiffness: f64,
    /// Breakaway torque, N·m.
    pub rotational_friction: f64,
    pub start_angle: f64,
    pub goal_angle: f64,
}

impl Default for KnobSpec {
    fn default() -> Self {
        Self {
            n_lobes: 4,
            lobe_length: 0.05,
            lobe_half_width: 0.006,
            hub_radius: 0.015,
            torsional_stiffness: 0.0,
            rotational_friction: 0.005,
            start_angle: PI / 2.0,
            goal_angle: 0.0,
        }
    }
}

impl KnobSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_lobes < 1 {
            return Err("knob needs at least one lobe".into());
        }
        for (name, v) in [
            ("lobe_length", self.lobe_length),
            ("lobe_half_width", self.lobe_half_width),
            ("hub_radius", self.hub_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.torsional_stiffness.is_finite() && self.torsional_stiffness >= 0.0) {
            return Err(format!(
                "torsional_stiffness must be non-negative, got {}",
                self.torsional_stiffness
            ));
        }
        if !(self.rotational_friction.is_finite() && self.rotational_friction >= 0.0) {
            return Err(format!(
                "rotational_friction must be non-negative, got {}",
                self.rotational_friction
            ));
        }
        if !(self.start_angle.is_finite() && self.goal_angle.is_finite()) {
            return Err("start and goal angles must be finite".into());
        }
        Ok(())
    }

    /// Outermost radius of the knob.
    pub fn reach(&self) -> f64 {
        (self.lobe_length + self.lobe_half_width).max(self.hub_radius)
    }

    fn lobe_dirs(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.n_lobes;
        (0..n).map(move |j| {
            let a = 2.0 * PI * j as f64 / n as f64;
            Vec2::new(a.cos(), a.sin())
        })
    }

    /// Deepest penetration of a world point into the knob at `angle`;
    /// negative values are clearances.
    pub fn penetration(&self, p: &Vec2, angle: f64) -> f64 {
        let x = rotate(p, -angle);
        let hub = self.hub_radius - x.norm();
        self.lobe_dirs()
            .map(|e| {
                let t = x.dot(&e).clamp(0.0, self.lobe_length);
                self.lobe_half_width - (x - t * e).norm()
            })
            .fold(hub, f64::max)
    }

    /// Penalty energy `Σ c/2·depth²` summed over hub and lobes.
    pub fn contact_energy(&self, p: &Vec2, angle: f64, stiffness: f64) -> f64 {
        let x = rotate(p, -angle);
        let mut e = 0.0;
        self.for_each_component(&x, |_, _, depth, _| {
            e += 0.5 * stiffness * depth * depth;
        });
        e
    }

    /// Penalty energy with gradient and Hessian over `(p_x, p_y, angle)`.
    pub fn contact_derivatives(&self, p: &Vec2, angle: f64, stiffness: f64) -> ContactDerivatives {
        let x = rotate(p, -angle);
        let mut value = 0.0;
        // derivatives in the knob frame
        let mut gx = Vec2::zeros();
        let mut hx = Matrix2::zeros();
        let mut in_contact = false;
        self.for_each_component(&x, |n, dist, depth, capped| {
            in_contact = true;
            value += 0.5 * stiffness * depth * depth;
            gx -= stiffness * depth * n;
            let nnt = n * n.transpose();
            hx += stiffness * nnt;
            if capped {
                // distance to a point: ∇²D = (I − n nᵀ)/D
                hx -= stiffness * depth * (Matrix2::identity() - nnt) / dist;
            }
        });
        if !in_contact {
            return ContactDerivatives::default();
        }
        let rot = rotation(angle);
        let w = Vec2::new(x.y, -x.x); // ∂x/∂angle
        let j = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        let gp = rot * gx;
        let ga = gx.dot(&w);
        let hpp = rot * hx * rot.transpose();
        let hpa = j * rot * gx + rot * (hx * w);
        let haa = w.dot(&(hx * w)) - gx.dot(&x);
        ContactDerivatives {
            value,
            gradient: Vector3::new(gp.x, gp.y, ga),
            hessian: Matrix3::new(
                hpp[(0, 0)],
                hpp[(0, 1)],
                hpa.x,
                hpp[(1, 0)],
                hpp[(1, 1)],
                hpa.y,
                hpa.x,
                hpa.y,
                haa,
            ),
        }
    }

    /// Visits every component the knob-frame point `x` penetrates with
    /// `(outward normal, distance to core, depth, normal from a point core)`.
    fn for_each_component(&self, x: &Vec2, mut f: impl FnMut(Vec2, f64, f64, bool)) {
        let hub_d = x.norm();
        if hub_d < self.hub_radius {
            let n = if hub_d > 0.0 { x / hub_d } else { Vec2::new(1.0, 0.0) };
            f(n, hub_d.max(f64::MIN_POSITIVE), self.hub_radius - hub_d, true);
        }
        for e in self.lobe_dirs() {
            let s = x.dot(&e);
            let t = s.clamp(0.0, self.lobe_length);
            let v = x - t * e;
            let d = v.norm();
            if d < self.lobe_half_width {
                let n = if d > 0.0 { v / d } else { Vec2::new(-e.y, e.x) };
                let capped = s <= 0.0 || s >= self.lobe_length;
                f(n, d.max(f64::MIN_POSITIVE), self.lobe_half_width - d, capped);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactDerivatives {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

#[inline]
pub(crate) fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

#[inline]
pub(crate) fn rotate(p: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knob() -> KnobSpec {
        KnobSpec::default()
    }

    #[test]
    fn penetration_signs() {
        let k = knob();
        // on the first lobe axis, halfway out
        assert!((k.penetration(&Vec2::new(0.03, 0.0), 0.0) - k.lobe_half_width).abs() < 1e-15);
        // well outside
        assert!(k.penetration(&Vec2::new(0.1, 0.0), 0.0) < 0.0);
        // rotating the knob moves the lobe away
        assert!(k.penetration(&Vec2::new(0.03, 0.0), 0.5) < 0.0);
    }

    #[test]
    fn contact_derivatives_match_finite_differences() {
        let k = knob();
        let c = 1e5;
        let h = 1e-7;
        let points = [
            (Vec2::new(0.03, 0.004), 0.02),   // lobe side face
            (Vec2::new(0.053, 0.001), -0.01), // end cap
            (Vec2::new(0.010, 0.008), 0.3),   // hub and lobe side
        ];
        for (p, a) in points {
            let d = k.contact_derivatives(&p, a, c);
            assert!(d.value > 0.0);
            let f = |q: Vector3<f64>| k.contact_energy(&Vec2::new(q.x, q.y), q.z, c);
            let grad = |q: Vector3<f64>| k.contact_derivatives(&Vec2::new(q.x, q.y), q.z, c).gradient;
            let q0 = Vector3::new(p.x, p.y, a);
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = h;
                let fd = (f(q0 + e) - f(q0 - e)) / (2.0 * h);
                assert!(
                    (fd - d.gradient[i]).abs() < 1e-6 * (1.0 + d.gradient[i].abs()),
                    "g{i}: {fd} vs {}",
                    d.gradient[i]
                );
                let hd = (grad(q0 + e) - grad(q0 - e)) / (2.0 * h);
                for r in 0..3 {
                    let an = d.hessian[(r, i)];
                    assert!(
                        (hd[r] - an).abs() < 1e-4 * (1.0 + an.abs()),
                        "H{r}{i}: {} vs {an}",
                        hd[r]
                    );
                }
            }
        }
    }

    #[test]
    fn no_contact_means_zero_derivatives() {
        let k = knob();
        let d = k.contact_derivatives(&Vec2::new(0.2, 0.0), 0.0, 1e5);
        assert_eq!(d, ContactDerivatives::default());
    }
}
