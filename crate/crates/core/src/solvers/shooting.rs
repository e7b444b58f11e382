//! Shooting on the initial costate `Π₀` of the two-point boundary problem
//! `P(0) = P₀`, `P(1) = P₁`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{pack_upper, solve, symmetrize, SpdMatrix, SymMatrix};
use crate::omt::solve_pi0;
use crate::path::{uniform_grid, CovariancePath, PathModel, DEFAULT_GRID};
use crate::solvers::costate::{
    integrate_costate, terminal_covariance, CostateDynamics, FisherRaoDynamics, WlsDynamics,
};
use crate::solvers::lm::{levenberg_marquardt, LmOptions, Termination};
use crate::solvers::ode::IvpOptions;

/// A shooting solution counts as converged below this endpoint residual.
pub const SHOOT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    FisherRao,
    Wls { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProblem {
    pub p0: SpdMatrix,
    pub p1: SpdMatrix,
    pub sigma: f64,
    pub family: Family,
    /// Starting costate. Without one, a fixed list of seeds is tried.
    pub pi0_guess: Option<SymMatrix>,
}

impl BoundaryProblem {
    pub fn new(p0: SpdMatrix, p1: SpdMatrix, sigma: f64, family: Family) -> Result<Self> {
        if p0.dim() != p1.dim() {
            return Err(Error::DimensionMismatch { expected: p0.dim(), found: p1.dim() });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("sigma must be finite and non-negative"));
        }
        if let Family::Wls { epsilon } = family {
            if epsilon == 0.0 {
                return Err(Error::EpsilonZero);
            }
        }
        Ok(Self { p0, p1, sigma, family, pi0_guess: None })
    }

    pub fn with_guess(mut self, pi0: SymMatrix) -> Result<Self> {
        if pi0.dim() != self.p0.dim() {
            return Err(Error::DimensionMismatch { expected: self.p0.dim(), found: pi0.dim() });
        }
        self.pi0_guess = Some(pi0);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }

    /// The path model started from `pi0`.
    pub fn model(&self, pi0: SymMatrix) -> PathModel {
        match self.family {
            Family::FisherRao => PathModel::FrOde { p0: self.p0.clone(), pi0, sigma: self.sigma },
            Family::Wls { epsilon } => PathModel::WlsOde { p0: self.p0.clone(), pi0, sigma: self.sigma, epsilon },
        }
    }

    /// Seeds tried when no guess is given: zero, the transport costate, and
    /// the transport costate rescaled by `P₀⁻¹` so that `-P₀Π₀` matches the
    /// transport system matrix at `t = 0`.
    pub fn default_seeds(&self) -> Vec<SymMatrix> {
        let n = self.dim();
        let mut seeds = vec![SymMatrix::zeros(n)];
        if let Ok(omt) = solve_pi0(&self.p0, &self.p1, self.sigma) {
            if let Some(scaled) = solve(self.p0.as_mat(), omt.as_mat()) {
                seeds.push(omt);
                seeds.push(SymMatrix::from_symmetric_part(&symmetrize(&scaled)));
            } else {
                seeds.push(omt);
            }
        }
        seeds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOptions {
    pub ivp: IvpOptions,
    pub lm: LmOptions,
    /// Success threshold on `‖P(1) - P₁‖_F`.
    pub tolerance: f64,
    /// LM stops early once the residual is below `target_scale · ‖P₁‖_F`.
    pub target_scale: f64,
    /// Points of the uniform grid the solution path is sampled on.
    pub grid: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            ivp: IvpOptions::with_tolerances(1e-11, 1e-13),
            lm: LmOptions::default(),
            tolerance: SHOOT_TOLERANCE,
            target_scale: 1e-11,
            grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootSolution {
    pub pi0: SymMatrix,
    pub path: CovariancePath,
    /// `‖P(1) - P₁‖_F`
    pub residual: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Index of the seed the solution started from.
    pub seed_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShootError {
    /// No seed reached the tolerance; carries the best iterate.
    NotConverged(Box<ShootSolution>),
    Failed(Error),
}

impl From<ShootError> for Error {
    fn from(e: ShootError) -> Self {
        match e {
            ShootError::NotConverged(best) => Error::ConvergenceFailure { residual: best.residual },
            ShootError::Failed(e) => e,
        }
    }
}

impl From<Error> for ShootError {
    fn from(e: Error) -> Self {
        ShootError::Failed(e)
    }
}

impl core::fmt::Display for ShootError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ShootError::NotConverged(best) => {
                write!(f, "shooting did not converge (best residual {:.3e})", best.residual)
            }
            ShootError::Failed(e) => write!(f, "{e}"),
        }
    }
}

/// Weighted upper triangle of `P(1) - P₁`; its norm is the Frobenius norm.
fn endpoint_residual(p: &SpdMatrix, target: &SpdMatrix, out: &mut Vec<f64>) {
    let n = p.dim();
    let diff = p.as_mat() - target.as_mat();
    out.clear();
    for i in 0..n {
        for j in i..n {
            let w = if i == j { 1.0 } else { core::f64::consts::SQRT_2 };
            out.push(w * diff[(i, j)]);
        }
    }
}

/// `‖P(1; Π₀) - P₁‖_F`.
pub fn shoot_residual(problem: &BoundaryProblem, pi0: &SymMatrix, ivp: &IvpOptions) -> Result<f64> {
    let p1 = match problem.family {
        Family::FisherRao => terminal_covariance(&FisherRaoDynamics { sigma: problem.sigma }, &problem.p0, pi0, ivp)?,
        Family::Wls { epsilon } => {
            terminal_covariance(&WlsDynamics::new(problem.sigma, epsilon)?, &problem.p0, pi0, ivp)?
        }
    };
    Ok((p1.as_mat() - problem.p1.as_mat()).norm())
}

/// Solves for `Π₀` by Levenberg-Marquardt on the endpoint residual.
pub fn shoot(problem: &BoundaryProblem, options: &ShootOptions) -> Result<ShootSolution, ShootError> {
    match problem.family {
        Family::FisherRao => shoot_with(&FisherRaoDynamics { sigma: problem.sigma }, problem, options),
        Family::Wls { epsilon } => shoot_with(&WlsDynamics::new(problem.sigma, epsilon)?, problem, options),
    }
}

fn shoot_with<D: CostateDynamics>(
    dynamics: &D,
    problem: &BoundaryProblem,
    options: &ShootOptions,
) -> Result<ShootSolution, ShootError> {
    let n = problem.dim();
    let seeds = match &problem.pi0_guess {
        Some(guess) => vec![guess.clone()],
        None => problem.default_seeds(),
    };
    let mut lm = options.lm.clone();
    lm.target = lm.target.max(options.target_scale * problem.p1.as_mat().norm());

    let residual_fn = |x: &[f64], out: &mut Vec<f64>| -> Result<()> {
        let pi0 = SymMatrix::from_upper(n, x)?;
        let p1 = terminal_covariance(dynamics, &problem.p0, &pi0, &options.ivp)?;
        endpoint_residual(&p1, &problem.p1, out);
        Ok(())
    };

    let mut best: Option<ShootSolution> = None;
    let mut last_error = None;
    for (seed_index, seed) in seeds.iter().enumerate() {
        let report = match levenberg_marquardt(residual_fn, &pack_upper(seed.as_mat()), &lm) {
            Ok(report) => report,
            Err(e) => {
                last_error = Some(e);
                continue;
            }
        };
        let pi0 = SymMatrix::from_upper(n, &report.x)?;
        let traj =
            match integrate_costate(dynamics, &problem.p0, &pi0, &uniform_grid(options.grid.max(2)), &options.ivp) {
                Ok(traj) => traj,
                Err(e) => {
                    last_error = Some(e);
                    continue;
                }
            };
        let solution = ShootSolution {
            path: traj.path.with_model(problem.model(pi0.clone())),
            pi0,
            residual: report.residual_norm,
            iterations: report.iterations,
            termination: report.termination,
            seed_index,
        };
        if solution.residual < options.tolerance {
            return Ok(solution);
        }
        if best.as_ref().is_none_or(|b| solution.residual < b.residual) {
            best = Some(solution);
        }
    }
    match best {
        Some(best) => Err(ShootError::NotConverged(Box::new(best))),
        None => Err(ShootError::Failed(last_error.unwrap_or(Error::ConvergenceFailure { residual: f64::INFINITY }))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn identical_endpoints_without_noise() {
        let p = SpdMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
        let problem = BoundaryProblem::new(p.clone(), p, 0.0, Family::FisherRao)
            .unwrap()
            .with_guess(SymMatrix::zeros(2))
            .unwrap();
        let sol = shoot(&problem, &ShootOptions::default()).unwrap();
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.pi0.as_mat().norm(), 0.0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn recovers_known_costate() {
        let p0 = SpdMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 0.6]).unwrap();
        let truth = SymMatrix::from_row_slice(2, &[0.2, -0.1, -0.1, -0.3]).unwrap();
        let ivp = IvpOptions::with_tolerances(1e-11, 1e-13);
        let p1 = terminal_covariance(&FisherRaoDynamics { sigma: 0.5 }, &p0, &truth, &ivp).unwrap();
        let problem = BoundaryProblem::new(p0, p1.clone(), 0.5, Family::FisherRao).unwrap();
        let sol = shoot(&problem, &ShootOptions::default()).unwrap();
        assert!(sol.residual < 1e-8, "residual {}", sol.residual);
        let end = sol.path.last();
        assert!((end.as_mat() - p1.as_mat()).norm() < 1e-8);
    }

    #[test]
    fn residual_weights_match_frobenius() {
        let a = SpdMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 0.6]).unwrap();
        let b = SpdMatrix::identity(2);
        let mut r = Vec::new();
        endpoint_residual(&a, &b, &mut r);
        let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - (a.as_mat() - Mat::identity(2, 2)).norm()).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_epsilon() {
        let p = SpdMatrix::identity(2);
        assert!(matches!(
            BoundaryProblem::new(p.clone(), p, 0.5, Family::Wls { epsilon: 0.0 }),
            Err(Error::EpsilonZero)
        ));
    }
}
