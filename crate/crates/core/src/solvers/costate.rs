//! Coupled `(P, Π)` flows shared by the shooting and continuation drivers.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fisher_rao::fr_rhs;
use crate::linalg::{pack_upper, packed_len, symmetrize, unpack_upper, Mat, SpdMatrix, SquareMatrix, SymMatrix};
use crate::path::CovariancePath;
use crate::solvers::ode::{integrate_checked, IvpOptions, IvpSpec};
use crate::wls::{wls_rhs, wls_system_mat};

/// Right-hand side of a costate system and the optimal system matrix it
/// induces.
pub trait CostateDynamics {
    fn rhs(&self, p: &Mat, pi: &Mat) -> (Mat, Mat);
    fn system_matrix(&self, p: &Mat, pi: &Mat) -> Mat;
}

/// `dP = -2PΠP + σ²I`, `dΠ = 2ΠPΠ`, `A = -PΠ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherRaoDynamics {
    pub sigma: f64,
}

impl CostateDynamics for FisherRaoDynamics {
    fn rhs(&self, p: &Mat, pi: &Mat) -> (Mat, Mat) {
        fr_rhs(p, pi, self.sigma * self.sigma)
    }

    fn system_matrix(&self, p: &Mat, pi: &Mat) -> Mat {
        -(p * pi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsDynamics {
    sigma: f64,
    epsilon: f64,
}

impl WlsDynamics {
    pub fn new(sigma: f64, epsilon: f64) -> Result<Self> {
        if epsilon == 0.0 {
            return Err(Error::EpsilonZero);
        }
        Ok(Self { sigma, epsilon })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl CostateDynamics for WlsDynamics {
    fn rhs(&self, p: &Mat, pi: &Mat) -> (Mat, Mat) {
        wls_rhs(p, pi, self.sigma * self.sigma, self.epsilon)
    }

    fn system_matrix(&self, p: &Mat, pi: &Mat) -> Mat {
        wls_system_mat(p, pi, self.epsilon)
    }
}

/// `dP = -ΠP - PΠ + σ²I`, `dΠ = Π²`, `A = -Π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmtDynamics {
    pub sigma: f64,
}

impl CostateDynamics for OmtDynamics {
    fn rhs(&self, p: &Mat, pi: &Mat) -> (Mat, Mat) {
        let n = p.nrows();
        let pip = pi * p;
        let d_p = -(&pip + pip.transpose()) + Mat::identity(n, n) * (self.sigma * self.sigma);
        (d_p, symmetrize(&(pi * pi)))
    }

    fn system_matrix(&self, _p: &Mat, pi: &Mat) -> Mat {
        -pi.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    /// Covariances and system matrices at the requested times.
    pub path: CovariancePath,
    pub costates: Vec<SymMatrix>,
    pub accepted_steps: usize,
}

/// Integrates the packed `(P, Π)` system from `t = 0` and samples it at
/// `times`. Fails with `SpdLost` if `P` stops being positive definite.
pub fn integrate_costate<D: CostateDynamics>(
    dynamics: &D,
    p0: &SpdMatrix,
    pi0: &SymMatrix,
    times: &[f64],
    options: &IvpOptions,
) -> Result<CostateTrajectory> {
    let n = p0.dim();
    if pi0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pi0.dim() });
    }
    let m = packed_len(n);
    let mut initial = pack_upper(p0.as_mat());
    initial.extend(pack_upper(pi0.as_mat()));

    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let p = unpack_upper(n, &y[..m]).expect("packed length");
        let pi = unpack_upper(n, &y[m..]).expect("packed length");
        let (d_p, d_pi) = dynamics.rhs(&p, &pi);
        dy[..m].copy_from_slice(&pack_upper(&d_p));
        dy[m..].copy_from_slice(&pack_upper(&d_pi));
    };
    let check = |t: f64, y: &[f64]| {
        let p = unpack_upper(n, &y[..m])?;
        if y.iter().any(|v| !v.is_finite()) || p.cholesky().is_none() {
            return Err(Error::SpdLost { t });
        }
        Ok(())
    };
    let spec = IvpSpec { rhs, t_span: (0.0, 1.0), initial, options: options.clone() };
    let sol = integrate_checked(spec, times, check)?;

    let mut covariances = Vec::with_capacity(sol.times.len());
    let mut costates = Vec::with_capacity(sol.times.len());
    let mut system = Vec::with_capacity(sol.times.len());
    for (&t, y) in sol.times.iter().zip(&sol.states) {
        let p = unpack_upper(n, &y[..m])?;
        let pi = unpack_upper(n, &y[m..])?;
        system.push(SquareMatrix::new(dynamics.system_matrix(&p, &pi))?);
        covariances.push(SpdMatrix::new(p).map_err(|_| Error::SpdLost { t })?);
        costates.push(SymMatrix::from_symmetric_part(&pi));
    }
    Ok(CostateTrajectory {
        path: CovariancePath::new(sol.times, covariances, Some(system))?,
        costates,
        accepted_steps: sol.accepted_steps,
    })
}

/// `P(1)` of the costate flow.
pub fn terminal_covariance<D: CostateDynamics>(
    dynamics: &D,
    p0: &SpdMatrix,
    pi0: &SymMatrix,
    options: &IvpOptions,
) -> Result<SpdMatrix> {
    let traj = integrate_costate(dynamics, p0, pi0, &[1.0], options)?;
    Ok(traj.path.covariances[0].clone())
}
