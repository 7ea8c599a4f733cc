//! Unconstrained minimizers for smooth strongly convex objectives of small
//! dimension.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ShmError};

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

pub trait Objective {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, with_hessian: bool) -> Result<Evaluation>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Newton steps on the generalized Hessian with Armijo backtracking.
    #[default]
    Newton,
    /// Barzilai–Borwein steps with a nonmonotone (max of recent values)
    /// line search.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub grad_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 80;
const NONMONOTONE_MEMORY: usize = 10;

fn checked(e: Evaluation) -> Result<Evaluation> {
    if !e.value.is_finite() || e.grad.iter().any(|g| !g.is_finite()) {
        return Err(ShmError::Numerical(format!(
            "objective or gradient is not finite (value {})",
            e.value
        )));
    }
    Ok(e)
}

/// Slack for comparing objective values that have stopped changing beyond
/// rounding.
fn rounding_slack(value: f64) -> f64 {
    16.0 * f64::EPSILON * value.abs().max(1.0)
}

pub fn minimize(method: Method, f: &dyn Objective, x0: DVector<f64>, rule: StopRule) -> Result<Outcome> {
    match method {
        Method::Newton => newton(f, x0, rule),
        Method::BarzilaiBorwein => barzilai_borwein(f, x0, rule),
    }
}

pub fn newton(f: &dyn Objective, x0: DVector<f64>, rule: StopRule) -> Result<Outcome> {
    let mut x = x0;
    let mut e = checked(f.eval(&x, true)?)?;
    let mut iterations = 0;
    loop {
        let grad_norm = e.grad.norm();
        if grad_norm <= rule.grad_tol || iterations >= rule.max_iter {
            return Ok(Outcome {
                converged: grad_norm <= rule.grad_tol,
                x,
                value: e.value,
                grad_norm,
                iterations,
            });
        }
        iterations += 1;

        let hessian = e.hessian.take().expect("hessian requested");
        let mut direction = match hessian.cholesky() {
            Some(chol) => -chol.solve(&e.grad),
            None => -e.grad.clone(),
        };
        let mut slope = e.grad.dot(&direction);
        if !(slope < 0.0) {
            direction = -e.grad.clone();
            slope = -grad_norm * grad_norm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial = &x + step * &direction;
            let te = checked(f.eval(&trial, true)?)?;
            if te.value <= e.value + ARMIJO * step * slope + rounding_slack(e.value) {
                accepted = Some((trial, te));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, te)) => {
                x = trial;
                e = te;
            }
            None => {
                return Ok(Outcome {
                    converged: false,
                    x,
                    value: e.value,
                    grad_norm,
                    iterations,
                })
            }
        }
    }
}

pub fn barzilai_borwein(f: &dyn Objective, x0: DVector<f64>, rule: StopRule) -> Result<Outcome> {
    let mut x = x0;
    let mut e = checked(f.eval(&x, false)?)?;
    let mut history = vec![e.value];
    let mut alpha = 1.0 / e.grad.amax().max(1.0);
    let mut iterations = 0;
    loop {
        let grad_norm = e.grad.norm();
        if grad_norm <= rule.grad_tol || iterations >= rule.max_iter {
            return Ok(Outcome {
                converged: grad_norm <= rule.grad_tol,
                x,
                value: e.value,
                grad_norm,
                iterations,
            });
        }
        iterations += 1;

        let direction = -alpha * &e.grad;
        let slope = e.grad.dot(&direction);
        let reference = history.iter().copied().fold(f64::MIN, f64::max);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial = &x + step * &direction;
            let te = checked(f.eval(&trial, false)?)?;
            if te.value <= reference + ARMIJO * step * slope + rounding_slack(reference) {
                accepted = Some((trial, te));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, te)) = accepted else {
            return Ok(Outcome {
                converged: false,
                x,
                value: e.value,
                grad_norm,
                iterations,
            });
        };
        let s = &trial - &x;
        let y = &te.grad - &e.grad;
        let sy = s.dot(&y);
        alpha = if sy > 0.0 {
            (s.dot(&s) / sy).clamp(1e-12, 1e12)
        } else {
            1e12
        };
        x = trial;
        e = te;
        history.push(e.value);
        if history.len() > NONMONOTONE_MEMORY {
            history.remove(0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ill-conditioned quadratic plus a smoothed kink.
    struct Test {
        scales: Vec<f64>,
    }

    impl Objective for Test {
        fn dim(&self) -> usize {
            self.scales.len()
        }

        fn eval(&self, x: &DVector<f64>, with_hessian: bool) -> Result<Evaluation> {
            let n = x.len();
            let mut value = 0.0;
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for i in 0..n {
                let d = x[i] - 1.0;
                value += 0.5 * self.scales[i] * d * d + (1.0 + x[i] * x[i]).sqrt();
                grad[i] = self.scales[i] * d + x[i] / (1.0 + x[i] * x[i]).sqrt();
                hess[(i, i)] = self.scales[i] + (1.0 + x[i] * x[i]).powf(-1.5);
            }
            Ok(Evaluation {
                value,
                grad,
                hessian: with_hessian.then_some(hess),
            })
        }
    }

    #[test]
    fn both_methods_converge() {
        let f = Test {
            scales: vec![1e-3, 1.0, 10.0, 100.0],
        };
        let rule = StopRule {
            grad_tol: 1e-10,
            max_iter: 20_000,
        };
        let a = minimize(Method::Newton, &f, DVector::zeros(4), rule).unwrap();
        let b = minimize(Method::BarzilaiBorwein, &f, DVector::zeros(4), rule).unwrap();
        assert!(a.converged && b.converged, "{a:?} {b:?}");
        assert!((a.x - b.x).norm() < 1e-6);
        assert!(a.iterations < b.iterations);
    }

    #[test]
    fn non_convergence_is_reported() {
        let f = Test { scales: vec![1.0; 3] };
        let out = newton(
            &f,
            DVector::from_element(3, 5.0),
            StopRule {
                grad_tol: 1e-12,
                max_iter: 1,
            },
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    struct NanObjective;

    impl Objective for NanObjective {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _: &DVector<f64>, _: bool) -> Result<Evaluation> {
            Ok(Evaluation {
                value: f64::NAN,
                grad: DVector::zeros(1),
                hessian: None,
            })
        }
    }

    #[test]
    fn nan_is_a_numerical_error() {
        let rule = StopRule {
            grad_tol: 1e-8,
            max_iter: 10,
        };
        assert!(matches!(
            barzilai_borwein(&NanObjective, DVector::zeros(1), rule),
            Err(ShmError::Numerical(_))
        ));
    }
}
