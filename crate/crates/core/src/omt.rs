//! Closed-form optimal-mass-transport / Schrödinger-bridge covariance paths.
//!
//! Minimizing `∫ tr(A P A') dt` subject to `dP = AP + PA' + σ²I` gives
//!
//! ```text
//! A_t = -Π₀ (I - Π₀ t)⁻¹
//! P_t = (I - Π₀ t) P₀ (I - Π₀ t) + σ² (I t - Π₀ t²)
//! Π₀  = I - P₀^{-½} ((P₀^{½} P₁ P₀^{½} + ¼σ⁴ I)^{½} - ½σ² I) P₀^{-½}
//! ```
//!
//! With `σ = 0` this is the Wasserstein-2 geodesic between zero-mean Gaussians.

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_spd, solve, sqrt_spd, symmetrize, Mat, SpdMatrix, SquareMatrix, SymMatrix};
use crate::path::{path_cost, CovariancePath, Objective};

/// Costate eigenvalues must stay below `1 - COSTATE_MARGIN`.
pub const COSTATE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OmtModel {
    p0: SpdMatrix,
    sigma: f64,
    pi0: SymMatrix,
}

impl OmtModel {
    /// Rejects costates with an eigenvalue at or above `1 - COSTATE_MARGIN`:
    /// `I - Π₀ t` would become singular inside `[0, 1]`.
    pub fn new(p0: SpdMatrix, sigma: f64, pi0: SymMatrix) -> Result<Self> {
        if pi0.dim() != p0.dim() {
            return Err(Error::DimensionMismatch { expected: p0.dim(), found: pi0.dim() });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("sigma must be finite and non-negative"));
        }
        let max_eig = pi0.max_eigenvalue();
        if max_eig >= 1.0 - COSTATE_MARGIN {
            return Err(Error::CostateBound { max_eig });
        }
        Ok(Self { p0, sigma, pi0 })
    }

    /// The optimal model between two endpoints.
    pub fn between(p0: &SpdMatrix, p1: &SpdMatrix, sigma: f64) -> Result<Self> {
        let pi0 = solve_pi0(p0, p1, sigma)?;
        Self::new(p0.clone(), sigma, pi0)
    }

    pub fn p0(&self) -> &SpdMatrix {
        &self.p0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pi0(&self) -> &SymMatrix {
        &self.pi0
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }
}

pub fn solve_pi0(p0: &SpdMatrix, p1: &SpdMatrix, sigma: f64) -> Result<SymMatrix> {
    let n = p0.dim();
    if p1.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p1.dim() });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument("sigma must be finite and non-negative"));
    }
    let s2 = sigma * sigma;
    let id = Mat::identity(n, n);
    let half = sqrt_spd(p0);
    let inv_half = inv_sqrt_spd(p0);
    let inner = symmetrize(&(half.as_mat() * p1.as_mat() * half.as_mat())) + &id * (0.25 * s2 * s2);
    let root = sqrt_spd(&SpdMatrix::new(inner)?);
    let shifted = root.as_mat() - &id * (0.5 * s2);
    let pi0 = &id - inv_half.as_mat() * shifted * inv_half.as_mat();
    Ok(SymMatrix::from_symmetric_part(&pi0))
}

fn factor(model: &OmtModel, t: f64) -> Mat {
    let n = model.dim();
    Mat::identity(n, n) - model.pi0.as_mat() * t
}

/// `(P_t, A_t)` at time `t`.
pub fn path_at(model: &OmtModel, t: f64) -> Result<(SpdMatrix, SquareMatrix)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidTime { t });
    }
    let n = model.dim();
    let pi0 = model.pi0.as_mat();
    let f = factor(model, t);
    let s2 = model.sigma * model.sigma;
    let noise = (Mat::identity(n, n) * t - pi0 * (t * t)) * s2;
    let p = symmetrize(&(&f * model.p0.as_mat() * &f + noise));
    // Π₀ and (I - Π₀ t) commute, so Π₀ (I - Π₀ t)⁻¹ = (I - Π₀ t)⁻¹ Π₀.
    let gain = solve(&f, pi0).ok_or(Error::SingularFactor { t })?;
    let a = -symmetrize(&gain);
    Ok((SpdMatrix::new(p)?, SquareMatrix::new(a)?))
}

/// `Π_t = Π₀ (I - Π₀ t)⁻¹`, the costate along the optimal path.
pub fn costate_at(model: &OmtModel, t: f64) -> Result<SymMatrix> {
    let f = factor(model, t);
    let gain = solve(&f, model.pi0.as_mat()).ok_or(Error::SingularFactor { t })?;
    Ok(SymMatrix::from_symmetric_part(&gain))
}

/// `∫₀¹ tr(A P A') dt` on the path grid.
pub fn omt_cost(path: &CovariancePath) -> Result<f64> {
    path_cost(path, Objective::Omt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(p: f64) -> SpdMatrix {
        SpdMatrix::scalar(p).unwrap()
    }

    #[test]
    fn identical_endpoints_without_noise_give_zero_costate() {
        let p = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let pi0 = solve_pi0(&p, &p, 0.0).unwrap();
        assert!(pi0.as_mat().norm() < 1e-14);
    }

    #[test]
    fn scalar_costates() {
        let pi0 = solve_pi0(&scalar(1.0), &scalar(4.0), 0.0).unwrap();
        assert!((pi0[(0, 0)] + 1.0).abs() < 1e-14);
        // √(6·22 + 64) = 14, so Π₀ = 1 - (14 - 8)/6 = 0
        let pi0 = solve_pi0(&scalar(6.0), &scalar(22.0), 4.0).unwrap();
        assert!(pi0[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn pure_diffusion_path() {
        let model = OmtModel::new(scalar(6.0), 4.0, SymMatrix::zeros(1)).unwrap();
        let (p, a) = path_at(&model, 0.5).unwrap();
        assert!((p[(0, 0)] - 14.0).abs() < 1e-12);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn noiseless_scalar_path_is_squared_linear_root() {
        let model = OmtModel::between(&scalar(1.0), &scalar(4.0), 0.0).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            let (p, a) = path_at(&model, t).unwrap();
            assert!((p[(0, 0)] - (1.0 + t) * (1.0 + t)).abs() < 1e-12);
            assert!((a[(0, 0)] - 1.0 / (1.0 + t)).abs() < 1e-12);
        }
    }

    #[test]
    fn start_of_path_returns_p0_and_minus_pi0() {
        let p0 = SpdMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
        let p1 = SpdMatrix::from_row_slice(2, &[0.4, -0.1, -0.1, 2.0]).unwrap();
        let model = OmtModel::between(&p0, &p1, 0.7).unwrap();
        let (p, a) = path_at(&model, 0.0).unwrap();
        assert!((p.as_mat() - p0.as_mat()).norm() < 1e-15);
        assert!((a.as_mat() + model.pi0().as_mat()).norm() < 1e-15);
    }

    #[test]
    fn costate_bound_is_enforced() {
        let err = OmtModel::new(scalar(1.0), 0.0, SymMatrix::from_diagonal(&[1.0]));
        assert!(matches!(err, Err(Error::CostateBound { .. })));
        let err = OmtModel::new(scalar(1.0), 0.0, SymMatrix::from_diagonal(&[1.0 - 1e-10]));
        assert!(matches!(err, Err(Error::CostateBound { .. })));
        assert!(OmtModel::new(scalar(1.0), 0.0, SymMatrix::from_diagonal(&[0.99])).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let err = solve_pi0(&scalar(1.0), &SpdMatrix::identity(2), 0.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
