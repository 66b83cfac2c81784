//! Damped Newton minimizer used by the finger and arena equilibrium solves.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the gradient.
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective evaluated at a point: value, gradient and Hessian.
pub struct Evaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Minimizes a smooth objective from `x0`.
///
/// Newton directions come from a Cholesky solve. When the Hessian is not
/// positive definite its eigenvalues are replaced by their magnitudes
/// (floored relative to the largest) before solving, so negative-curvature
/// directions are followed downhill. Steps are globalized with Armijo
/// backtracking.
pub fn minimize<F, V>(mut eval: F, mut value_only: V, x0: DVector<f64>, opts: NewtonOptions) -> NewtonOutcome
where
    F: FnMut(&DVector<f64>) -> Evaluation,
    V: FnMut(&DVector<f64>) -> f64,
{
    let mut x = x0;
    let mut e = eval(&x);
    let initial_value = e.value;
    let mut iterations = 0;

    loop {
        let gnorm = e.gradient.amax();
        if gnorm < opts.tolerance {
            return NewtonOutcome {
                x,
                value: e.value,
                initial_value,
                gradient_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        if iterations >= opts.max_iterations || !gnorm.is_finite() {
            return NewtonOutcome {
                x,
                value: e.value,
                initial_value,
                gradient_norm: gnorm,
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let newton = e
            .hessian
            .clone()
            .cholesky()
            .map(|c| -c.solve(&e.gradient))
            .filter(|d| d.iter().all(|v| v.is_finite()));
        let (direction, is_newton) = match newton {
            Some(d) if d.dot(&e.gradient) < 0.0 => (d, true),
            _ => (modified_newton(&e), false),
        };

        let slope = direction.dot(&e.gradient);
        // Slack for round-off once the decrease falls below float resolution.
        let slack = 1e-14 * (1.0 + e.value.abs());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + step * &direction;
            let v = value_only(&trial);
            if v.is_finite() && v <= e.value + 1e-4 * step * slope + slack {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        if let (Some(best), false, true) = (&accepted, is_newton, step == 1.0) {
            // Floored curvature understates flat directions; extend while the value drops.
            let mut best_value = value_only(best);
            for _ in 0..40 {
                step *= 2.0;
                let trial = &x + step * &direction;
                let v = value_only(&trial);
                if !(v.is_finite() && v < best_value) {
                    break;
                }
                best_value = v;
                accepted = Some(trial);
            }
        }
        match accepted {
            Some(trial) => {
                x = trial;
                e = eval(&x);
            }
            None if is_newton => {
                // The model is locally exact but the decrease is unmeasurable.
                let trial = &x + &direction;
                let te = eval(&trial);
                if te.gradient.amax() < gnorm && te.value <= e.value + slack {
                    x = trial;
                    e = te;
                } else {
                    return NewtonOutcome {
                        x,
                        value: e.value,
                        initial_value,
                        gradient_norm: gnorm,
                        iterations,
                        converged: false,
                    };
                }
            }
            None => {
                return NewtonOutcome {
                    x,
                    value: e.value,
                    initial_value,
                    gradient_norm: gnorm,
                    iterations,
                    converged: false,
                };
            }
        }
    }
}

fn modified_newton(e: &Evaluation) -> DVector<f64> {
    let eig = e.hessian.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let floor = 1e-10 * top;
    let coeffs = eig.eigenvectors.transpose() * &e.gradient;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| -c / l.abs().max(floor)),
    );
    let d = &eig.eigenvectors * scaled;
    if d.iter().all(|v| v.is_finite()) && d.dot(&e.gradient) < 0.0 {
        d
    } else {
        -&e.gradient / top
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &DVector<f64>) -> Evaluation {
        let (a, b) = (x[0], x[1]);
        let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let gradient = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
        let hessian = DMatrix::from_row_slice(2, 2, &[2.0 - 400.0 * b + 1200.0 * a * a, -400.0 * a, -400.0 * a, 200.0]);
        Evaluation {
            value,
            gradient,
            hessian,
        }
    }

    #[test]
    fn converges_on_rosenbrock() {
        let out = minimize(
            rosenbrock,
            |x| rosenbrock(x).value,
            DVector::from_vec(vec![-1.2, 1.0]),
            NewtonOptions::default(),
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.value <= out.initial_value);
    }

    #[test]
    fn quadratic_needs_one_step() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let eval = |x: &DVector<f64>| Evaluation {
            value: 0.5 * x.dot(&(&h * x)) - b.dot(x),
            gradient: &h * x - &b,
            hessian: h.clone(),
        };
        let out = minimize(eval, |x| eval(x).value, DVector::zeros(2), NewtonOptions::default());
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn escapes_a_saddle() {
        // f = x^4/4 - x^2/2 + y^2, saddle at the origin
        let eval = |x: &DVector<f64>| Evaluation {
            value: x[0].powi(4) / 4.0 - x[0] * x[0] / 2.0 + x[1] * x[1],
            gradient: DVector::from_vec(vec![x[0].powi(3) - x[0], 2.0 * x[1]]),
            hessian: DMatrix::from_row_slice(2, 2, &[3.0 * x[0] * x[0] - 1.0, 0.0, 0.0, 2.0]),
        };
        let out = minimize(
            eval,
            |x| eval(x).value,
            DVector::from_vec(vec![1e-3, 0.5]),
            NewtonOptions::default(),
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && out.x[1].abs() < 1e-8);
    }

    #[test]
    fn crosses_a_shallow_negative_curvature_region() {
        // f = 1e8 x^2 + 1e-4 (y^4/4 - y^2/2); floored curvature alone grows y by 0.5% per step
        let eval = |x: &DVector<f64>| Evaluation {
            value: 1e8 * x[0] * x[0] + 1e-4 * (x[1].powi(4) / 4.0 - x[1] * x[1] / 2.0),
            gradient: DVector::from_vec(vec![2e8 * x[0], 1e-4 * (x[1].powi(3) - x[1])]),
            hessian: DMatrix::from_row_slice(2, 2, &[2e8, 0.0, 0.0, 1e-4 * (3.0 * x[1] * x[1] - 1.0)]),
        };
        let out = minimize(
            eval,
            |x| eval(x).value,
            DVector::from_vec(vec![1e-3, 1e-3]),
            NewtonOptions::default(),
        );
        assert!(out.converged, "{out:?}");
        assert!(out.x[0].abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-3, "{out:?}");
    }

    #[test]
    fn reports_non_convergence() {
        let out = minimize(
            rosenbrock,
            |x| rosenbrock(x).value,
            DVector::from_vec(vec![-1.2, 1.0]),
            NewtonOptions {
                max_iterations: 2,
                tolerance: 1e-12,
            },
        );
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
