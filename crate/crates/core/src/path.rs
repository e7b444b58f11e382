//! Sampled covariance paths, the family selector, and path costs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fisher_rao::{scalar_eval, ScalarPathForm};
use crate::linalg::{frobenius_sq, sym_split, Mat, SpdMatrix, SquareMatrix, SymMatrix};
use crate::omt::{path_at, OmtModel};
use crate::solvers::costate::{integrate_costate, FisherRaoDynamics, WlsDynamics};
use crate::solvers::ode::IvpOptions;
use crate::wls::noiseless_path;

/// Default number of grid points for sampled paths.
pub const DEFAULT_GRID: usize = 201;

const GRID_UNIFORMITY_TOL: f64 = 1e-9;

/// A covariance path sampled on an increasing grid in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePath {
    pub times: Vec<f64>,
    pub covariances: Vec<SpdMatrix>,
    pub system_matrices: Option<Vec<SquareMatrix>>,
    /// The model the path was sampled from, if any.
    pub model: Option<PathModel>,
}

impl CovariancePath {
    pub fn new(
        times: Vec<f64>,
        covariances: Vec<SpdMatrix>,
        system_matrices: Option<Vec<SquareMatrix>>,
    ) -> Result<Self> {
        if times.len() != covariances.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: covariances.len() });
        }
        if times.is_empty() {
            return Err(Error::GridTooCoarse { points: 0, required: 1 });
        }
        check_times(&times)?;
        let n = covariances[0].dim();
        if let Some(bad) = covariances.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.dim() });
        }
        if let Some(a) = &system_matrices {
            if a.len() != times.len() {
                return Err(Error::DimensionMismatch { expected: times.len(), found: a.len() });
            }
            if let Some(bad) = a.iter().find(|a| a.dim() != n) {
                return Err(Error::DimensionMismatch { expected: n, found: bad.dim() });
            }
        }
        Ok(Self { times, covariances, system_matrices, model: None })
    }

    pub fn with_model(mut self, model: PathModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariances[0].dim()
    }

    pub fn first(&self) -> &SpdMatrix {
        &self.covariances[0]
    }

    pub fn last(&self) -> &SpdMatrix {
        &self.covariances[self.covariances.len() - 1]
    }

    /// Grid spacing, if the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        uniform_step(&self.times)
    }

    /// Largest Frobenius distance to another path on the same grid.
    pub fn sup_distance(&self, other: &CovariancePath) -> Result<f64> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        Ok(self
            .covariances
            .iter()
            .zip(&other.covariances)
            .map(|(a, b)| (a.as_mat() - b.as_mat()).norm())
            .fold(0.0, f64::max))
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    for (k, &t) in times.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) || (k > 0 && t <= times[k - 1]) {
            return Err(Error::InvalidTime { t });
        }
    }
    Ok(())
}

/// `n` equally spaced points on `[0, 1]`, endpoints exact.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= GRID_UNIFORMITY_TOL * h.abs().max(1.0));
    uniform.then_some(h)
}

/// Composite Simpson quadrature on a uniform grid of at least three points.
/// An odd number of intervals closes with the 3/8 rule on the last three.
pub fn simpson(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    if times.len() < 3 {
        return Err(Error::GridTooCoarse { points: times.len(), required: 3 });
    }
    let h = uniform_step(times).ok_or(Error::NonUniformGrid)?;
    let intervals = values.len() - 1;
    let (simpson_intervals, tail) = if intervals.is_multiple_of(2) {
        (intervals, 0.0)
    } else {
        let k = intervals - 3;
        let v = &values[k..];
        (k, 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]))
    };
    let mut sum = 0.0;
    for pair in 0..simpson_intervals / 2 {
        let i = 2 * pair;
        sum += values[i] + 4.0 * values[i + 1] + values[i + 2];
    }
    Ok(sum * h / 3.0 + tail)
}

/// Tagged parametric description of a covariance path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathModel {
    Omt(OmtModel),
    FrOde { p0: SpdMatrix, pi0: SymMatrix, sigma: f64 },
    WlsOde { p0: SpdMatrix, pi0: SymMatrix, sigma: f64, epsilon: f64 },
    WlsNoiseless { p0: SpdMatrix, pi0: SymMatrix, epsilon: f64 },
    Scalar(ScalarPathForm),
}

impl PathModel {
    pub fn dim(&self) -> usize {
        match self {
            PathModel::Omt(m) => m.dim(),
            PathModel::FrOde { p0, .. } | PathModel::WlsOde { p0, .. } | PathModel::WlsNoiseless { p0, .. } => p0.dim(),
            PathModel::Scalar(_) => 1,
        }
    }
}

/// Samples `model` on a uniform grid of `points` points.
pub fn sample(model: &PathModel, points: usize) -> Result<CovariancePath> {
    if points < 2 {
        return Err(Error::GridTooCoarse { points, required: 2 });
    }
    sample_at(model, &uniform_grid(points), &IvpOptions::default())
}

/// Samples `model` at arbitrary increasing times in `[0, 1]`. ODE families are
/// integrated once from `t = 0` with dense output.
pub fn sample_at(model: &PathModel, times: &[f64], ivp: &IvpOptions) -> Result<CovariancePath> {
    check_times(times)?;
    let path = match model {
        PathModel::Omt(m) => {
            let (ps, as_): (Vec<_>, Vec<_>) =
                times.iter().map(|&t| path_at(m, t)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
            CovariancePath::new(times.to_vec(), ps, Some(as_))?
        }
        PathModel::FrOde { p0, pi0, sigma } => {
            let dynamics = FisherRaoDynamics { sigma: *sigma };
            integrate_costate(&dynamics, p0, pi0, times, ivp)?.path
        }
        PathModel::WlsOde { p0, pi0, sigma, epsilon } => {
            let dynamics = WlsDynamics::new(*sigma, *epsilon)?;
            integrate_costate(&dynamics, p0, pi0, times, ivp)?.path
        }
        PathModel::WlsNoiseless { p0, pi0, epsilon } => {
            let (ps, as_): (Vec<_>, Vec<_>) = times
                .iter()
                .map(|&t| noiseless_path(p0, pi0, *epsilon, t))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            CovariancePath::new(times.to_vec(), ps, Some(as_))?
        }
        PathModel::Scalar(form) => {
            let sigma2 = form.sigma() * form.sigma();
            let mut ps = Vec::with_capacity(times.len());
            let mut as_ = Vec::with_capacity(times.len());
            for &t in times {
                let (p, dp, _) = scalar_eval(form, t);
                // dp = 2 a p + σ²
                ps.push(SpdMatrix::scalar(p)?);
                as_.push(SquareMatrix::new(Mat::from_element(1, 1, (dp - sigma2) / (2.0 * p)))?);
            }
            CovariancePath::new(times.to_vec(), ps, Some(as_))?
        }
    };
    Ok(path.with_model(model.clone()))
}

/// The quadratic penalty on `A_t` defining each path family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `tr(A P A')`
    Omt,
    /// `tr(P⁻¹ A P A')`
    Info,
    /// `‖A_s‖²_F + ε ‖A_a‖²_F`
    Wls { epsilon: f64 },
}

impl Objective {
    pub fn integrand(&self, p: &SpdMatrix, a: &SquareMatrix) -> f64 {
        match *self {
            Objective::Omt => (a.as_mat() * p.as_mat() * a.transpose()).trace(),
            Objective::Info => {
                let apa = a.as_mat() * p.as_mat() * a.transpose();
                (p.inverse().as_mat() * apa).trace()
            }
            Objective::Wls { epsilon } => {
                let (s, k) = sym_split(a);
                frobenius_sq(&s) + epsilon * frobenius_sq(&k)
            }
        }
    }
}

/// Simpson quadrature of the objective integrand along the path.
pub fn path_cost(path: &CovariancePath, objective: Objective) -> Result<f64> {
    let a = path.system_matrices.as_ref().ok_or(Error::MissingSystemMatrices)?;
    let values: Vec<f64> = path.covariances.iter().zip(a).map(|(p, a)| objective.integrand(p, a)).collect();
    simpson(&path.times, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [3, 4, 5, 8, 11] {
            let t = uniform_grid(n);
            let v: Vec<f64> = t.iter().map(|t| 1.0 + 2.0 * t - t * t + 4.0 * t * t * t).collect();
            let exact = 1.0 + 1.0 - 1.0 / 3.0 + 1.0;
            assert!((simpson(&t, &v).unwrap() - exact).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn simpson_rejects_coarse_or_irregular_grids() {
        assert!(matches!(simpson(&[0.0, 1.0], &[1.0, 1.0]), Err(Error::GridTooCoarse { .. })));
        assert!(matches!(simpson(&[0.0, 0.1, 1.0], &[1.0, 1.0, 1.0]), Err(Error::NonUniformGrid)));
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = uniform_grid(201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[200], 1.0);
        assert_eq!(g[100], 0.5);
    }

    #[test]
    fn path_validation() {
        let p = SpdMatrix::identity(2);
        let err = CovariancePath::new(alloc::vec![0.0, 0.0], alloc::vec![p.clone(), p.clone()], None);
        assert!(matches!(err, Err(Error::InvalidTime { .. })));
        let err = CovariancePath::new(alloc::vec![0.0], alloc::vec![p.clone(), p], None);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_control_costs_nothing() {
        let times = uniform_grid(5);
        let ps = alloc::vec![SpdMatrix::identity(2); 5];
        let a = alloc::vec![SquareMatrix::zeros(2); 5];
        let path = CovariancePath::new(times.clone(), ps.clone(), Some(a)).unwrap();
        for obj in [Objective::Omt, Objective::Info, Objective::Wls { epsilon: 3.0 }] {
            assert_eq!(path_cost(&path, obj).unwrap(), 0.0);
        }
        let bare = CovariancePath::new(times, ps, None).unwrap();
        assert!(matches!(path_cost(&bare, Objective::Omt), Err(Error::MissingSystemMatrices)));
    }
}
