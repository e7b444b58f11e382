//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! Step-size control follows Hairer, Nørsett and Wanner (DOPRI5): a PI
//! controller on the embedded error estimate and a fourth-order continuous
//! extension for output between steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{pack_upper, unpack_upper, Mat, SpdMatrix, SquareMatrix};
use crate::path::CovariancePath;

#[allow(unused_imports)]
use num_traits::Float;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FACC1: f64 = 5.0;
const FACC2: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct IvpOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size.
    pub max_step: Option<f64>,
    /// Shorten steps so that every output time is a step endpoint. Outputs are
    /// then exact step values rather than interpolants.
    pub stop_at_outputs: bool,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_steps: 100_000, max_step: None, stop_at_outputs: false }
    }
}

impl IvpOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive"));
        }
        if self.max_step.is_some_and(|h| h.is_nan() || h <= 0.0) {
            return Err(Error::InvalidArgument("max_step must be positive"));
        }
        Ok(())
    }
}

/// An initial value problem `y' = f(t, y)`, `y(t₀) = y₀` on `t_span`.
pub struct IvpSpec<F> {
    pub rhs: F,
    pub t_span: (f64, f64),
    pub initial: Vec<f64>,
    pub options: IvpOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
}

/// Integrates `spec` and reports the state at each of `outputs`, which must be
/// increasing and inside `t_span`.
pub fn integrate<F>(spec: IvpSpec<F>, outputs: &[f64]) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_checked(spec, outputs, |_, _| Ok(()))
}

/// As [`integrate`], calling `check` on every accepted step. An error from
/// `check` aborts the integration.
pub fn integrate_checked<F, C>(spec: IvpSpec<F>, outputs: &[f64], mut check: C) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    C: FnMut(f64, &[f64]) -> Result<()>,
{
    let IvpSpec { mut rhs, t_span: (t0, t_end), initial, options } = spec;
    options.validate()?;
    if t_end.is_nan() || t0.is_nan() || t_end <= t0 {
        return Err(Error::InvalidArgument("t_span must be increasing"));
    }
    for (k, &t) in outputs.iter().enumerate() {
        if t < t0 || t > t_end || (k > 0 && t <= outputs[k - 1]) {
            return Err(Error::InvalidTime { t });
        }
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let n = initial.len();
    let rtol = options.rel_tol;
    let atol = options.abs_tol;
    let h_max = options.max_step.unwrap_or(t_end - t0).min(t_end - t0);

    let mut sol = OdeSolution {
        times: Vec::with_capacity(outputs.len()),
        states: Vec::with_capacity(outputs.len()),
        accepted_steps: 0,
        rejected_steps: 0,
        evaluations: 0,
    };
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] == t0 {
        sol.times.push(t0);
        sol.states.push(initial.clone());
        next_out += 1;
    }

    let mut y = initial;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut rcont = vec![vec![0.0; n]; 5];

    rhs(t0, &y, &mut k1);
    sol.evaluations += 1;
    let mut h = initial_step(&mut rhs, t0, &y, &k1, h_max, rtol, atol, &mut sol.evaluations);
    let mut t = t0;
    let mut facold = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if sol.accepted_steps + sol.rejected_steps >= options.max_steps {
            return Err(Error::MaxStepsExceeded { t });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t, h });
        }
        let mut target = t_end;
        if options.stop_at_outputs && next_out < outputs.len() {
            target = outputs[next_out];
        }
        let mut landing = false;
        if t + 1.01 * h >= target {
            h = target - t;
            landing = true;
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if landing { target } else { t + h };
        rhs(t_new, &stage, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &y1, &mut k7);
        sol.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let sk = atol + rtol * y[i].abs().max(y1[i].abs());
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / sk) * (e / sk);
        }
        let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };

        if !err.is_finite() {
            sol.rejected_steps += 1;
            last_rejected = true;
            h /= FACC1;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
            let mut h_new = h / fac;
            facold = err.max(1e-4);
            sol.accepted_steps += 1;

            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }

            check(t_new, &y1)?;

            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let tau = outputs[next_out];
                let state = if tau == t_new { y1.clone() } else { dense(&rcont, (tau - t) / h) };
                sol.times.push(tau);
                sol.states.push(state);
                next_out += 1;
            }

            y.copy_from_slice(&y1);
            k1.copy_from_slice(&k7);
            t = t_new;

            h_new = h_new.min(h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            sol.rejected_steps += 1;
            last_rejected = true;
            h /= FACC1.min(fac11 / SAFE);
        }
    }

    Ok(sol)
}

fn dense(rcont: &[Vec<f64>], theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    (0..rcont[0].len())
        .map(|i| {
            rcont[0][i] + theta * (rcont[1][i] + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    h_max: f64,
    rtol: f64,
    atol: f64,
    evaluations: &mut usize,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = atol + rtol * y0[i].abs();
        dnf += (f0[i] / sk) * (f0[i] / sk);
        dny += (y0[i] / sk) * (y0[i] / sk);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(h_max);

    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h, &y1, &mut f1);
    *evaluations += 1;
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = atol + rtol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 || !der12.is_finite() { 1e-6_f64.max(h * 1e-3) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrates `dP = A P + P A' + σ² I` from `p0` and samples it at `times`.
pub fn integrate_covariance<F>(
    mut a_of_t: F,
    p0: &SpdMatrix,
    sigma: f64,
    times: &[f64],
    options: &IvpOptions,
) -> Result<CovariancePath>
where
    F: FnMut(f64) -> Mat,
{
    let n = p0.dim();
    let s2 = sigma * sigma;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let p = unpack_upper(n, y).expect("packed length");
        let a = a_of_t(t);
        let ap = &a * &p;
        let d = &ap + ap.transpose() + Mat::identity(n, n) * s2;
        dy.copy_from_slice(&pack_upper(&d));
    };
    let spec = IvpSpec { rhs, t_span: (0.0, 1.0), initial: pack_upper(p0.as_mat()), options: options.clone() };
    let sol = integrate(spec, times)?;
    let covariances = sol
        .times
        .iter()
        .zip(&sol.states)
        .map(|(&t, y)| SpdMatrix::new(unpack_upper(n, y)?).map_err(|_| Error::SpdLost { t }))
        .collect::<Result<Vec<_>>>()?;
    CovariancePath::new(sol.times, covariances, None)
}

/// As [`integrate_covariance`] for a constant system matrix, keeping `A` on
/// the returned path.
pub fn integrate_constant_system(
    a: &SquareMatrix,
    p0: &SpdMatrix,
    sigma: f64,
    times: &[f64],
    options: &IvpOptions,
) -> Result<CovariancePath> {
    if a.dim() != p0.dim() {
        return Err(Error::DimensionMismatch { expected: p0.dim(), found: a.dim() });
    }
    let mut path = integrate_covariance(|_| a.as_mat().clone(), p0, sigma, times, options)?;
    path.system_matrices = Some(vec![a.clone(); path.len()]);
    Ok(path)
}
