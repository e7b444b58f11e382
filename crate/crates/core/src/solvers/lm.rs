//! Levenberg-Marquardt for small dense least-squares problems.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop as soon as `‖r‖` drops to this value.
    pub target: f64,
    /// Relative step-size tolerance.
    pub x_tol: f64,
    /// Relative reduction tolerance on `‖r‖`.
    pub f_tol: f64,
    /// Forward-difference step is `jacobian_step · (1 + |x|)`.
    pub jacobian_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            target: 0.0,
            x_tol: 1e-14,
            f_tol: 1e-14,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Target,
    SmallStep,
    SmallReduction,
    MaxIterations,
    DampingOverflow,
    /// The Jacobian could not be evaluated around the current iterate.
    JacobianFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `‖r(x)‖₂`
    pub residual_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-15;
const SCALE_FLOOR: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Forward-difference Jacobian of `f` at `x`, given `r = f(x)`. A column
/// whose forward evaluation fails is retried with a backward step.
pub fn forward_jacobian<F>(f: &mut F, x: &[f64], r: &[f64], step: f64) -> Result<Mat>
where
    F: FnMut(&[f64], &mut Vec<f64>) -> Result<()>,
{
    let mut jac = Mat::zeros(r.len(), x.len());
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(r.len());
    for j in 0..x.len() {
        let h = step * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let signed_h = match f(&probe, &mut out) {
            Ok(()) => h,
            Err(_) => {
                probe[j] = x[j] - h;
                f(&probe, &mut out)?;
                -h
            }
        };
        if out.len() != r.len() {
            return Err(Error::DimensionMismatch { expected: r.len(), found: out.len() });
        }
        for i in 0..r.len() {
            jac[(i, j)] = (out[i] - r[i]) / signed_h;
        }
        probe[j] = x[j];
    }
    Ok(jac)
}

/// Minimizes `‖f(x)‖²` from `x0`. A failed evaluation at a trial point counts
/// as a rejected step; a failure at `x0` is returned as an error.
pub fn levenberg_marquardt<F>(mut f: F, x0: &[f64], options: &LmOptions) -> Result<LmReport>
where
    F: FnMut(&[f64], &mut Vec<f64>) -> Result<()>,
{
    let mut x = x0.to_vec();
    let mut r = Vec::new();
    f(&x, &mut r)?;
    let mut evaluations = 1;
    let mut r_norm = norm(&r);
    if !r_norm.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut lambda = options.initial_damping;
    let mut trial_r = Vec::new();
    let n = x.len();

    let report = |x: Vec<f64>, r: Vec<f64>, r_norm, iterations, evaluations, termination| LmReport {
        x,
        residuals: r,
        residual_norm: r_norm,
        iterations,
        evaluations,
        termination,
    };

    if r_norm <= options.target {
        return Ok(report(x, r, r_norm, 0, evaluations, Termination::Target));
    }

    for iteration in 1..=options.max_iterations {
        let Ok(jac) = forward_jacobian(&mut f, &x, &r, options.jacobian_step) else {
            return Ok(report(x, r, r_norm, iteration - 1, evaluations, Termination::JacobianFailure));
        };
        evaluations += n;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * Mat::from_column_slice(r.len(), 1, &r);
        let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let scale: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(SCALE_FLOOR * max_diag.max(SCALE_FLOOR))).collect();

        loop {
            let mut system = jtj.clone();
            for i in 0..n {
                system[(i, i)] += lambda * scale[i];
            }
            let step = system.clone().cholesky().map(|c| c.solve(&(-&grad))).or_else(|| system.lu().solve(&(-&grad)));
            let accepted = match step {
                Some(step) if step.iter().all(|v| v.is_finite()) => {
                    let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    evaluations += 1;
                    match f(&trial, &mut trial_r) {
                        Ok(()) => {
                            let trial_norm = norm(&trial_r);
                            (trial_norm.is_finite() && trial_norm < r_norm).then_some((
                                trial,
                                trial_norm,
                                norm(step.as_slice()),
                            ))
                        }
                        Err(_) => None,
                    }
                }
                _ => None,
            };

            match accepted {
                Some((trial, trial_norm, step_norm)) => {
                    let reduction = r_norm - trial_norm;
                    let x_norm = norm(&x);
                    x = trial;
                    core::mem::swap(&mut r, &mut trial_r);
                    let previous = r_norm;
                    r_norm = trial_norm;
                    lambda = (lambda / 10.0).max(MIN_DAMPING);
                    if r_norm <= options.target {
                        return Ok(report(x, r, r_norm, iteration, evaluations, Termination::Target));
                    }
                    if step_norm <= options.x_tol * (x_norm + options.x_tol) {
                        return Ok(report(x, r, r_norm, iteration, evaluations, Termination::SmallStep));
                    }
                    if reduction <= options.f_tol * previous {
                        return Ok(report(x, r, r_norm, iteration, evaluations, Termination::SmallReduction));
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > MAX_DAMPING {
                        return Ok(report(x, r, r_norm, iteration, evaluations, Termination::DampingOverflow));
                    }
                }
            }
        }
    }
    let iterations = options.max_iterations;
    Ok(report(x, r, r_norm, iterations, evaluations, Termination::MaxIterations))
}

/// Central-difference Jacobian, used to validate [`forward_jacobian`].
pub fn central_jacobian<F>(f: &mut F, x: &[f64], step: f64) -> Result<Mat>
where
    F: FnMut(&[f64], &mut Vec<f64>) -> Result<()>,
{
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut probe = x.to_vec();
    f(&probe, &mut plus)?;
    let mut jac = Mat::zeros(plus.len(), x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        f(&probe, &mut plus)?;
        probe[j] = x[j] - step;
        f(&probe, &mut minus)?;
        probe[j] = x[j];
        for i in 0..plus.len() {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}
