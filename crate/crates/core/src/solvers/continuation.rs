//! Continuation in the asymmetry weight `ε`, warm-starting each shooting
//! problem from the previous costate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{SpdMatrix, SymMatrix};
use crate::path::CovariancePath;
use crate::solvers::shooting::{shoot, BoundaryProblem, Family, ShootError, ShootOptions};

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPlan {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_step: f64,
    pub seed_pi0: SymMatrix,
}

impl ContinuationPlan {
    pub const DEFAULT_STEP: f64 = 0.001;

    pub fn new(epsilon_start: f64, epsilon_end: f64, seed_pi0: SymMatrix) -> Self {
        Self { epsilon_start, epsilon_end, epsilon_step: Self::DEFAULT_STEP, seed_pi0 }
    }

    /// `ε_k = start + k·step` for every `k` with `ε_k ≤ end` (up to rounding).
    pub fn epsilons(&self) -> Result<Vec<f64>> {
        let (start, end, step) = (self.epsilon_start, self.epsilon_end, self.epsilon_step);
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument("epsilon step must be positive"));
        }
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidArgument("epsilon range must be increasing"));
        }
        if start == 0.0 || end == 0.0 || (start < 0.0) != (end < 0.0) {
            return Err(Error::EpsilonZero);
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| start + k as f64 * step).collect())
    }
}

/// How the previous costate is turned into the next starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Predictor {
    /// Reuse the previous `Π₀` unchanged.
    Previous,
    /// Rescale the previous `Π₀` so the skew part of `A₀` stays fixed; see
    /// [`rotation_preserving_guess`].
    #[default]
    RotationPreserving,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub shoot: ShootOptions,
    pub predictor: Predictor,
    /// Keep the sampled path of every `record_every`-th step (and the last).
    /// Zero keeps only the last.
    pub record_every: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { shoot: ShootOptions::default(), predictor: Predictor::default(), record_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub pi0: SymMatrix,
    pub residual: f64,
    pub iterations: usize,
    pub path: Option<CovariancePath>,
}

/// Where a continuation stopped before reaching `epsilon_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationStop {
    pub epsilon: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub steps: Vec<ContinuationStep>,
    pub stopped: Option<ContinuationStop>,
    /// Largest Frobenius change of `Π₀` between consecutive steps.
    pub max_pi0_jump: f64,
    pub epsilon_step: f64,
}

impl ContinuationReport {
    /// Consecutive costates moved by less than ten steps' worth.
    pub fn is_smooth(&self) -> bool {
        self.max_pi0_jump < 10.0 * self.epsilon_step
    }

    pub fn last(&self) -> &ContinuationStep {
        self.steps.last().expect("a report holds at least the seed step")
    }

    pub fn completed(&self) -> bool {
        self.stopped.is_none()
    }
}

/// Follows a branch of WLS solutions over the plan's `ε` values.
pub fn continue_epsilon(
    p0: &SpdMatrix,
    p1: &SpdMatrix,
    sigma: f64,
    plan: &ContinuationPlan,
    options: &ContinuationOptions,
) -> Result<ContinuationReport> {
    let epsilons = plan.epsilons()?;
    let last_index = epsilons.len() - 1;
    let mut report = ContinuationReport {
        steps: Vec::with_capacity(epsilons.len()),
        stopped: None,
        max_pi0_jump: 0.0,
        epsilon_step: plan.epsilon_step,
    };
    let mut guess = plan.seed_pi0.clone();
    let mut previous = plan.seed_pi0.clone();

    for (k, &epsilon) in epsilons.iter().enumerate() {
        if k > 0 && options.predictor == Predictor::RotationPreserving {
            guess = rotation_preserving_guess(p0, &previous, epsilons[k - 1], epsilon);
        }
        let problem =
            BoundaryProblem::new(p0.clone(), p1.clone(), sigma, Family::Wls { epsilon })?.with_guess(guess.clone())?;
        let solution = match shoot(&problem, &options.shoot) {
            Ok(solution) => solution,
            Err(err) => {
                let error = match err {
                    ShootError::NotConverged(best) if k == 0 => {
                        return Err(Error::SeedFailure { epsilon, residual: best.residual });
                    }
                    ShootError::Failed(_) if k == 0 => {
                        return Err(Error::SeedFailure { epsilon, residual: f64::INFINITY });
                    }
                    other => Error::from(other),
                };
                report.stopped = Some(ContinuationStop { epsilon, error });
                break;
            }
        };
        if k > 0 {
            let jump = (solution.pi0.as_mat() - previous.as_mat()).norm();
            report.max_pi0_jump = report.max_pi0_jump.max(jump);
        }
        let keep = k == last_index || (options.record_every > 0 && k % options.record_every == 0);
        guess = solution.pi0.clone();
        previous = solution.pi0.clone();
        report.steps.push(ContinuationStep {
            epsilon,
            pi0: solution.pi0,
            residual: solution.residual,
            iterations: solution.iterations,
            path: keep.then_some(solution.path),
        });
    }

    if report.stopped.is_some() {
        if let Some(last) = report.steps.last_mut().filter(|s| s.path.is_none()) {
            let problem = BoundaryProblem::new(p0.clone(), p1.clone(), sigma, Family::Wls { epsilon: last.epsilon })?;
            last.path = Some(resample(&problem, &last.pi0, &options.shoot)?);
        }
    }
    Ok(report)
}

/// In the eigenbasis of `P₀` the initial system matrix has skew part
/// `(λᵢ - λⱼ) Π_ij / 2ε`. Scaling the off-diagonal entries between distinct
/// eigenvalues by `ε_new / ε_old` keeps that rotation rate when `ε` changes.
pub fn rotation_preserving_guess(p0: &SpdMatrix, pi0: &SymMatrix, eps_old: f64, eps_new: f64) -> SymMatrix {
    let (lambda, v) = p0.eigen();
    let ratio = eps_new / eps_old;
    let top = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut local = v.transpose() * pi0.as_mat() * &v;
    let n = lambda.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && (lambda[i] - lambda[j]).abs() > 1e-12 * top {
                local[(i, j)] *= ratio;
            }
        }
    }
    SymMatrix::from_symmetric_part(&(&v * local * v.transpose()))
}

fn resample(problem: &BoundaryProblem, pi0: &SymMatrix, options: &ShootOptions) -> Result<CovariancePath> {
    let model = problem.model(pi0.clone());
    crate::path::sample_at(&model, &crate::path::uniform_grid(options.grid.max(2)), &options.ivp)
}
