//! Weighted-least-squares covariance paths with a rotating eigenspace.
//!
//! The penalty `‖A_s‖²_F + ε ‖A_a‖²_F` on the symmetric and skew parts of the
//! system matrix gives, with `k₁ = (1+ε)/2ε` and `k₂ = (1-ε)/ε`,
//!
//! ```text
//! dP/dt = -k₁ (Π P² + P² Π) + k₂ P Π P + σ² I
//! dΠ/dt =  k₁ (Π² P + P Π²) - k₂ Π P Π
//! A_t   = -½ (Π P + P Π) + (1/2ε) (P Π - Π P)
//! ```
//!
//! Along a trajectory the skew part `A_a` stays at its initial value. In the
//! frame rotating with `R_t = exp((1+ε) A_a t)` the system becomes
//! `dÂ = -σ² Π̂`, `dP̂ = ÂP̂ + P̂Â' + σ²I`, `dΠ̂ = -Â'Π̂ - Π̂Â`, so without noise
//! `Â` is constant and the path has a closed form. `ε = -1` recovers the
//! Fisher-Rao system.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    congruence, expm_mat, pack_upper, packed_len, sym_split, symmetrize, unpack_upper, Mat, SpdMatrix, SquareMatrix,
    SymMatrix,
};
use crate::path::{path_cost, CovariancePath, Objective};
use crate::solvers::ode::{integrate_checked, IvpOptions, IvpSpec};

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsState {
    pub p: SpdMatrix,
    pub pi: SymMatrix,
    pub epsilon: f64,
}

impl WlsState {
    pub fn new(p: SpdMatrix, pi: SymMatrix, epsilon: f64) -> Result<Self> {
        if p.dim() != pi.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: pi.dim() });
        }
        check_epsilon(epsilon)?;
        Ok(Self { p, pi, epsilon })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon == 0.0 {
        Err(Error::EpsilonZero)
    } else if !epsilon.is_finite() {
        Err(Error::InvalidArgument("epsilon must be finite"))
    } else {
        Ok(())
    }
}

pub(crate) fn wls_rhs(p: &Mat, pi: &Mat, sigma2: f64, epsilon: f64) -> (Mat, Mat) {
    let n = p.nrows();
    let k1 = (1.0 + epsilon) / (2.0 * epsilon);
    let k2 = (1.0 - epsilon) / epsilon;
    let p2 = p * p;
    let pi2 = pi * pi;
    let pip2 = pi * &p2;
    let pi2p = &pi2 * p;
    let d_p = (&pip2 + pip2.transpose()) * -k1 + p * pi * p * k2 + Mat::identity(n, n) * sigma2;
    let d_pi = (&pi2p + pi2p.transpose()) * k1 - pi * p * pi * k2;
    (symmetrize(&d_p), symmetrize(&d_pi))
}

pub(crate) fn wls_system_mat(p: &Mat, pi: &Mat, epsilon: f64) -> Mat {
    let pip = pi * p;
    let ppi = p * pi;
    (&pip + &ppi) * -0.5 + (&ppi - &pip) / (2.0 * epsilon)
}

pub fn wls_ode_rhs(state: &WlsState, sigma: f64) -> (SymMatrix, SymMatrix) {
    let (d_p, d_pi) = wls_rhs(state.p.as_mat(), state.pi.as_mat(), sigma * sigma, state.epsilon);
    (SymMatrix::from_symmetric_part(&d_p), SymMatrix::from_symmetric_part(&d_pi))
}

pub fn wls_system_matrix(state: &WlsState) -> SquareMatrix {
    SquareMatrix::new(wls_system_mat(state.p.as_mat(), state.pi.as_mat(), state.epsilon)).expect("square product")
}

/// `A_a = (1/2ε)(P₀Π₀ - Π₀P₀)`, the skew part that stays constant.
pub fn initial_skew(p0: &SpdMatrix, pi0: &SymMatrix, epsilon: f64) -> Result<SquareMatrix> {
    check_epsilon(epsilon)?;
    let ppi = p0.as_mat() * pi0.as_mat();
    SquareMatrix::new((&ppi - ppi.transpose()) / (2.0 * epsilon))
}

/// `exp((1+ε) A_a t)`.
pub fn frame_rotation(a0_skew: &SquareMatrix, epsilon: f64, t: f64) -> Mat {
    expm_mat(&(a0_skew.as_mat() * ((1.0 + epsilon) * t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrame {
    pub a0_skew: SquareMatrix,
    pub a_hat: SquareMatrix,
    pub p_hat: SpdMatrix,
    pub pi_hat: SymMatrix,
}

const SKEW_TOL: f64 = 1e-10;

fn check_skew(a: &SquareMatrix) -> Result<()> {
    let m = a.as_mat();
    if (m + m.transpose()).norm() >= SKEW_TOL * m.norm().max(1.0) {
        return Err(Error::InvalidArgument("frame generator must be skew-symmetric"));
    }
    Ok(())
}

/// Maps a state at time `t` into the rotating frame.
pub fn frame_transform(state: &WlsState, a0_skew: &SquareMatrix, t: f64) -> Result<RotatingFrame> {
    check_skew(a0_skew)?;
    let eps = state.epsilon;
    let r = frame_rotation(a0_skew, eps, t);
    let rt = r.transpose();
    let (a_s, _) = sym_split(&wls_system_matrix(state));
    let inner = a_s.as_mat() + a0_skew.transpose() * eps;
    Ok(RotatingFrame {
        a0_skew: a0_skew.clone(),
        a_hat: SquareMatrix::new(&rt * inner * &r)?,
        p_hat: SpdMatrix::new(congruence(&rt, state.p.as_mat()))?,
        pi_hat: SymMatrix::from_symmetric_part(&congruence(&rt, state.pi.as_mat())),
    })
}

/// Maps a rotating-frame state at time `t` back to `(P_t, Π_t)`.
pub fn frame_inverse(frame: &RotatingFrame, epsilon: f64, t: f64) -> Result<WlsState> {
    check_skew(&frame.a0_skew)?;
    let r = frame_rotation(&frame.a0_skew, epsilon, t);
    WlsState::new(
        SpdMatrix::new(congruence(&r, frame.p_hat.as_mat()))?,
        SymMatrix::from_symmetric_part(&congruence(&r, frame.pi_hat.as_mat())),
        epsilon,
    )
}

/// `(dÂ, dP̂, dΠ̂)` in the rotating frame.
pub fn frame_ode_rhs(frame: &RotatingFrame, sigma: f64) -> (SquareMatrix, SymMatrix, SymMatrix) {
    let (d_a, d_p, d_pi) = frame_rhs(frame.a_hat.as_mat(), frame.p_hat.as_mat(), frame.pi_hat.as_mat(), sigma * sigma);
    (
        SquareMatrix::new(d_a).expect("square"),
        SymMatrix::from_symmetric_part(&d_p),
        SymMatrix::from_symmetric_part(&d_pi),
    )
}

fn frame_rhs(a: &Mat, p: &Mat, pi: &Mat, sigma2: f64) -> (Mat, Mat, Mat) {
    let n = p.nrows();
    let ap = a * p;
    let d_p = &ap + ap.transpose() + Mat::identity(n, n) * sigma2;
    let pia = pi * a;
    let d_pi = -(&pia + pia.transpose());
    (pi * -sigma2, symmetrize(&d_p), symmetrize(&d_pi))
}

/// Rotating-frame trajectory sampled at `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<RotatingFrame>,
    /// The same trajectory mapped back to the original coordinates, with `A_t`.
    pub path: CovariancePath,
}

/// Integrates the rotating-frame system from `(P₀, Π₀)` and maps every sample
/// back to the original coordinates.
pub fn integrate_frame(
    p0: &SpdMatrix,
    pi0: &SymMatrix,
    sigma: f64,
    epsilon: f64,
    times: &[f64],
    options: &IvpOptions,
) -> Result<FrameTrajectory> {
    let state = WlsState::new(p0.clone(), pi0.clone(), epsilon)?;
    let a0_skew = initial_skew(p0, pi0, epsilon)?;
    let start = frame_transform(&state, &a0_skew, 0.0)?;
    let n = p0.dim();
    let na = n * n;
    let m = packed_len(n);
    let s2 = sigma * sigma;

    let mut initial: Vec<f64> = start.a_hat.as_mat().iter().copied().collect();
    initial.extend(pack_upper(start.p_hat.as_mat()));
    initial.extend(pack_upper(start.pi_hat.as_mat()));

    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let a = Mat::from_column_slice(n, n, &y[..na]);
        let p = unpack_upper(n, &y[na..na + m]).expect("packed length");
        let pi = unpack_upper(n, &y[na + m..]).expect("packed length");
        let (d_a, d_p, d_pi) = frame_rhs(&a, &p, &pi, s2);
        dy[..na].copy_from_slice(d_a.as_slice());
        dy[na..na + m].copy_from_slice(&pack_upper(&d_p));
        dy[na + m..].copy_from_slice(&pack_upper(&d_pi));
    };
    let check = |t: f64, y: &[f64]| {
        let p = unpack_upper(n, &y[na..na + m])?;
        if y.iter().any(|v| !v.is_finite()) || p.cholesky().is_none() {
            return Err(Error::SpdLost { t });
        }
        Ok(())
    };
    let spec = IvpSpec { rhs, t_span: (0.0, 1.0), initial, options: options.clone() };
    let sol = integrate_checked(spec, times, check)?;

    let mut frames = Vec::with_capacity(sol.times.len());
    let mut covariances = Vec::with_capacity(sol.times.len());
    let mut system = Vec::with_capacity(sol.times.len());
    for (&t, y) in sol.times.iter().zip(&sol.states) {
        let frame = RotatingFrame {
            a0_skew: a0_skew.clone(),
            a_hat: SquareMatrix::new(Mat::from_column_slice(n, n, &y[..na]))?,
            p_hat: SpdMatrix::new(unpack_upper(n, &y[na..na + m])?).map_err(|_| Error::SpdLost { t })?,
            pi_hat: SymMatrix::from_symmetric_part(&unpack_upper(n, &y[na + m..])?),
        };
        let r = frame_rotation(&a0_skew, epsilon, t);
        let back = frame_inverse(&frame, epsilon, t)?;
        // A = R Â R' + (1+ε) A_a
        let a = &r * frame.a_hat.as_mat() * r.transpose() + a0_skew.as_mat() * (1.0 + epsilon);
        system.push(SquareMatrix::new(a)?);
        covariances.push(back.p);
        frames.push(frame);
    }
    let path = CovariancePath::new(sol.times.clone(), covariances, Some(system))?;
    Ok(FrameTrajectory { times: sol.times, frames, path })
}

/// The state transition matrix `exp((1+ε)A_a t) exp((A_s + εA_a')t)` of the
/// noiseless path.
pub fn transition_matrix(p0: &SpdMatrix, pi0: &SymMatrix, epsilon: f64, t: f64) -> Result<Mat> {
    let a0 = SquareMatrix::new(wls_system_mat(p0.as_mat(), pi0.as_mat(), epsilon))?;
    let (a_s, a_a) = sym_split(&a0);
    let r = frame_rotation(&a_a, epsilon, t);
    let inner = (a_s.as_mat() + a_a.transpose() * epsilon) * t;
    Ok(r * expm_mat(&inner))
}

/// `(P_t, A_t)` of the noiseless path from `(P₀, Π₀)`.
pub fn noiseless_path(p0: &SpdMatrix, pi0: &SymMatrix, epsilon: f64, t: f64) -> Result<(SpdMatrix, SquareMatrix)> {
    check_epsilon(epsilon)?;
    if p0.dim() != pi0.dim() {
        return Err(Error::DimensionMismatch { expected: p0.dim(), found: pi0.dim() });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidTime { t });
    }
    let a0 = wls_system_mat(p0.as_mat(), pi0.as_mat(), epsilon);
    let (a_s, a_a) = sym_split(&SquareMatrix::new(a0.clone())?);
    let r = frame_rotation(&a_a, epsilon, t);
    let inner = (a_s.as_mat() + a_a.transpose() * epsilon) * t;
    let transition = &r * expm_mat(&inner);
    let p = SpdMatrix::new(congruence(&transition, p0.as_mat()))?;
    let a = SquareMatrix::new(&r * a0 * r.transpose())?;
    Ok((p, a))
}

/// `∫ ‖A_s‖²_F + ε ‖A_a‖²_F dt` on the path grid.
pub fn wls_cost(path: &CovariancePath, epsilon: f64) -> Result<f64> {
    path_cost(path, Objective::Wls { epsilon })
}

/// `max_t ‖A_{t,a} - A_{0,a}‖_F` along a path.
pub fn asym_part_constancy(path: &CovariancePath) -> Result<f64> {
    let a = path.system_matrices.as_ref().ok_or(Error::MissingSystemMatrices)?;
    let (_, first) = sym_split(&a[0]);
    Ok(a.iter().map(|a| (sym_split(a).1.as_mat() - first.as_mat()).norm()).fold(0.0, f64::max))
}

/// The skew generator `[[0, s·w], [-s·w, 0]]` with `w = (2k+1)π/2`.
///
/// Started from `diag(1, 0.3)`, its flow reaches `diag(0.3, 1)` at `t = 1`
/// at zero cost for `ε = 0`.
pub fn odd_quarter_turn_generator(k: u32, sign: f64) -> SquareMatrix {
    let w = sign * (2 * k + 1) as f64 * core::f64::consts::FRAC_PI_2;
    SquareMatrix::from_row_slice(2, &[0.0, w, -w, 0.0]).expect("2x2")
}

/// `[[0.3 + 0.7c², s·0.7cs], [s·0.7cs, 0.3 + 0.7s²]] + σ²tI` with
/// `c = cos(wt)`, `s = sin(wt)`, `w = (2k+1)π/2`.
pub fn odd_quarter_turn_covariance(k: u32, sign: f64, sigma: f64, t: f64) -> Mat {
    let w = (2 * k + 1) as f64 * core::f64::consts::FRAC_PI_2;
    let (s, c) = (w * t).sin_cos();
    let noise = sigma * sigma * t;
    let off = sign * 0.7 * c * s;
    Mat::from_row_slice(2, 2, &[0.3 + 0.7 * c * c + noise, off, off, 0.3 + 0.7 * s * s + noise])
}
