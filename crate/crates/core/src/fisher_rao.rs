//! Fisher-Rao covariance paths.
//!
//! Minimizing `∫ tr(P⁻¹ A P A') dt` subject to `dP = AP + PA' + σ²I` leads to
//!
//! ```text
//! dP/dt = -2 P Π P + σ² I
//! dΠ/dt =  2 Π P Π
//! A_t   = -P_t Π_t
//! ```
//!
//! and every solution satisfies `P̈ - Ṗ P⁻¹ Ṗ + σ⁴ P⁻¹ = 0`. Without noise the
//! solutions are the affine-invariant geodesics
//! `P₀^{½} (P₀^{-½} P₁ P₀^{-½})ᵗ P₀^{½}`. Scalar paths have closed forms in all
//! three regimes, see [`scalar_solve`].

use crate::error::{Error, Result};
use crate::linalg::{
    congruence, inv_sqrt_spd, log_spd, powm_spd, sqrt_spd, symmetrize, Mat, SpdMatrix, SquareMatrix, SymMatrix,
};
use crate::path::{uniform_step, CovariancePath};
use crate::solvers::roots::find_root;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct FrState {
    pub p: SpdMatrix,
    pub pi: SymMatrix,
}

impl FrState {
    pub fn new(p: SpdMatrix, pi: SymMatrix) -> Result<Self> {
        if p.dim() != pi.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: pi.dim() });
        }
        Ok(Self { p, pi })
    }
}

pub fn geodesic_noiseless(p0: &SpdMatrix, p1: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    check_pair(p0, p1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidTime { t });
    }
    if t == 0.0 {
        return Ok(p0.clone());
    }
    if t == 1.0 {
        return Ok(p1.clone());
    }
    let half = sqrt_spd(p0);
    let inv_half = inv_sqrt_spd(p0);
    let middle = SpdMatrix::new(congruence(inv_half.as_mat(), p1.as_mat()))?;
    SpdMatrix::new(congruence(half.as_mat(), powm_spd(&middle, t).as_mat()))
}

/// The constant `A` whose flow `e^{At} P₀ e^{A't}` is the noiseless geodesic.
pub fn constant_system_matrix(p0: &SpdMatrix, p1: &SpdMatrix) -> Result<SquareMatrix> {
    check_pair(p0, p1)?;
    let half = sqrt_spd(p0);
    let inv_half = inv_sqrt_spd(p0);
    let middle = SpdMatrix::new(congruence(inv_half.as_mat(), p1.as_mat()))?;
    let log = log_spd(&middle);
    SquareMatrix::new(half.as_mat() * log.as_mat() * inv_half.as_mat() * 0.5)
}

fn check_pair(p0: &SpdMatrix, p1: &SpdMatrix) -> Result<()> {
    if p0.dim() != p1.dim() {
        return Err(Error::DimensionMismatch { expected: p0.dim(), found: p1.dim() });
    }
    Ok(())
}

pub(crate) fn fr_rhs(p: &Mat, pi: &Mat, sigma2: f64) -> (Mat, Mat) {
    let n = p.nrows();
    let d_p = symmetrize(&(p * pi * p * -2.0)) + Mat::identity(n, n) * sigma2;
    let d_pi = symmetrize(&(pi * p * pi * 2.0));
    (d_p, d_pi)
}

pub fn fr_ode_rhs(state: &FrState, sigma: f64) -> (SymMatrix, SymMatrix) {
    let (d_p, d_pi) = fr_rhs(state.p.as_mat(), state.pi.as_mat(), sigma * sigma);
    (SymMatrix::from_symmetric_part(&d_p), SymMatrix::from_symmetric_part(&d_pi))
}

pub fn fr_system_matrix(state: &FrState) -> SquareMatrix {
    SquareMatrix::new(-(state.p.as_mat() * state.pi.as_mat())).expect("square product")
}

/// Defect of the second-order geodesic equation at interior grid index `k`,
/// using central differences.
pub fn geodesic_defect_at(path: &CovariancePath, sigma: f64, k: usize) -> Result<f64> {
    let h = uniform_step(&path.times).ok_or(Error::NonUniformGrid)?;
    if k == 0 || k + 1 >= path.len() {
        return Err(Error::InvalidArgument("defect needs an interior grid index"));
    }
    let prev = path.covariances[k - 1].as_mat();
    let here = path.covariances[k].as_mat();
    let next = path.covariances[k + 1].as_mat();
    let dp = (next - prev) / (2.0 * h);
    let ddp = (next - here * 2.0 + prev) / (h * h);
    let inv = path.covariances[k].inverse();
    let s4 = sigma.powi(4);
    let defect = ddp - &dp * inv.as_mat() * &dp + inv.as_mat() * s4;
    Ok(defect.norm())
}

/// Largest geodesic-equation defect over the interior of a uniform grid.
pub fn geodesic_residual(path: &CovariancePath, sigma: f64) -> Result<f64> {
    if path.len() < 5 {
        return Err(Error::GridTooCoarse { points: path.len(), required: 5 });
    }
    let mut worst = 0.0_f64;
    for k in 1..path.len() - 1 {
        worst = worst.max(geodesic_defect_at(path, sigma, k)?);
    }
    Ok(worst)
}

/// The three scalar solution families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarPathForm {
    /// `p₀ + s σ² t`, `s = ±1`.
    Linear { p0: f64, sign: f64, sigma: f64 },
    /// `a e^{bt} - c e^{-bt}` with `c = σ⁴ / (4ab²)`.
    Exponential { a: f64, b: f64, c: f64, sigma: f64 },
    /// `(σ²/ω) cos(ωt + θ)`.
    Trigonometric { omega: f64, theta: f64, sigma: f64 },
}

impl ScalarPathForm {
    pub fn sigma(&self) -> f64 {
        match *self {
            ScalarPathForm::Linear { sigma, .. }
            | ScalarPathForm::Exponential { sigma, .. }
            | ScalarPathForm::Trigonometric { sigma, .. } => sigma,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScalarPathForm::Linear { .. } => "linear",
            ScalarPathForm::Exponential { .. } => "exponential",
            ScalarPathForm::Trigonometric { .. } => "trigonometric",
        }
    }

    /// Initial costate `Π₀ = (σ² - ṗ₀) / (2 p₀²)`.
    pub fn initial_costate(&self) -> f64 {
        let (p, dp, _) = scalar_eval(self, 0.0);
        let s = self.sigma();
        (s * s - dp) / (2.0 * p * p)
    }
}

/// Width of the band around `|p₁ - p₀| = σ²` that is treated as linear.
pub fn boundary_tol(sigma: f64) -> f64 {
    1e-9 * (sigma * sigma).max(1.0)
}

/// `φ(b) / 4b²`, free of the cancellations in the unscaled form. Positive at
/// `b = 0` in the exponential regime and even in `b`.
pub fn exponential_root_fn(p0: f64, p1: f64, sigma: f64, b: f64) -> f64 {
    let delta = p1 - p0;
    let s4 = sigma.powi(4);
    let sinhc = if b.abs() < 1e-8 { 1.0 } else { b.sinh() / b };
    (delta - p0 * (-b).exp_m1()) * (delta - p0 * b.exp_m1()) - s4 * sinhc * sinhc
}

/// `σ⁴ sin²ω/ω² + 2p₀p₁ cos ω - (p₀² + p₁²)`, rewritten with
/// `p₀² + p₁² - 2p₀p₁ cos ω = Δ² + 4p₀p₁ sin²(ω/2)`.
pub fn trigonometric_root_fn(p0: f64, p1: f64, sigma: f64, omega: f64) -> f64 {
    let delta = p1 - p0;
    let s4 = sigma.powi(4);
    if omega < 1e-6 {
        return s4 - delta * delta;
    }
    let sinc = omega.sin() / omega;
    let half = (0.5 * omega).sin();
    s4 * sinc * sinc - delta * delta - 4.0 * p0 * p1 * half * half
}

/// The exponential form through `p₀` and `p₁` for a given root `b` of the
/// exponential root equation. `b` and `-b` describe the same path.
pub fn exponential_from_root(p0: f64, p1: f64, sigma: f64, b: f64) -> ScalarPathForm {
    let a = (p1 - p0 * (-b).exp()) / (2.0 * b.sinh());
    ScalarPathForm::Exponential { a, b, c: a - p0, sigma }
}

pub fn scalar_solve(p0: f64, p1: f64, sigma: f64) -> Result<ScalarPathForm> {
    for value in [p0, p1] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveInput { value });
        }
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument("sigma must be finite and non-negative"));
    }
    let delta = p1 - p0;
    let s2 = sigma * sigma;
    let tol = boundary_tol(sigma);

    if (delta.abs() - s2).abs() <= tol {
        let sign = if delta < 0.0 { -1.0 } else { 1.0 };
        return Ok(ScalarPathForm::Linear { p0, sign, sigma });
    }

    if delta.abs() > s2 {
        if sigma == 0.0 {
            return Ok(ScalarPathForm::Exponential { a: p0, b: (p1 / p0).ln(), c: 0.0, sigma });
        }
        let g = |b: f64| exponential_root_fn(p0, p1, sigma, b);
        let mut hi = 1.0;
        while g(hi) >= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoSignChange { lo: 0.0, hi });
            }
        }
        let b = find_root(g, 0.0, hi)?;
        if b == 0.0 {
            return Err(Error::NoSignChange { lo: 0.0, hi });
        }
        let form = exponential_from_root(p0, p1, sigma, b);
        return Ok(match form {
            ScalarPathForm::Exponential { a, .. } if a <= 0.0 => exponential_from_root(p0, p1, sigma, -b),
            form => form,
        });
    }

    let omega = find_root(|w| trigonometric_root_fn(p0, p1, sigma, w), 1e-8, core::f64::consts::PI - 1e-8)?;
    let c = p0;
    let d = (p1 - p0 * omega.cos()) / omega.sin();
    Ok(ScalarPathForm::Trigonometric { omega, theta: (-d).atan2(c), sigma })
}

/// `(p, ṗ, p̈)` at time `t`.
pub fn scalar_eval(form: &ScalarPathForm, t: f64) -> (f64, f64, f64) {
    match *form {
        ScalarPathForm::Linear { p0, sign, sigma } => {
            let rate = sign * sigma * sigma;
            (p0 + rate * t, rate, 0.0)
        }
        ScalarPathForm::Exponential { a, b, c, .. } => {
            let up = a * (b * t).exp();
            let down = c * (-b * t).exp();
            let p = up - down;
            (p, b * (up + down), b * b * p)
        }
        ScalarPathForm::Trigonometric { omega, theta, sigma } => {
            let s2 = sigma * sigma;
            let phase = omega * t + theta;
            (s2 / omega * phase.cos(), -s2 * phase.sin(), -s2 * omega * phase.cos())
        }
    }
}
