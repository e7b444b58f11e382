//! Fitting path families to sequences of noisy sample covariances by least
//! squares, `min Σₖ ‖P_{t_k} - P̃_{t_k}‖²_F`.
//!
//! Parameters are packed as the lower Cholesky factor of `P₀` (row by row,
//! log diagonal), then the upper triangle of `Π₀`, then a signed scalar `s`
//! with `σ = |s|` for families that carry noise.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    inv_sqrt_spd, log_spd, pack_upper, packed_len, solve, sqrt_spd, symmetrize, Mat, SpdMatrix, SymMatrix,
};
use crate::omt::{solve_pi0, OmtModel};
use crate::path::{sample_at, CovariancePath, PathModel};
use crate::solvers::lm::{levenberg_marquardt, LmOptions};
use crate::solvers::ode::IvpOptions;

#[allow(unused_imports)]
use num_traits::Float;

/// Default asymmetry weight for the rotating family.
pub const DEFAULT_WLS_EPSILON: f64 = 20.0;

/// Samples may have eigenvalues down to `-PSD_TOL · trace`.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FitDataset {
    pub times: Vec<f64>,
    pub samples: Vec<SymMatrix>,
    /// Samples per covariance, when known.
    pub samples_per_cov: Option<usize>,
}

impl FitDataset {
    pub fn new(times: Vec<f64>, samples: Vec<SymMatrix>, samples_per_cov: Option<usize>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: samples.len() });
        }
        if times.len() < 2 {
            return Err(Error::GridTooCoarse { points: times.len(), required: 2 });
        }
        for (k, &t) in times.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) || (k > 0 && t <= times[k - 1]) {
                return Err(Error::InvalidTime { t });
            }
        }
        let n = samples[0].dim();
        for s in &samples {
            if s.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
            }
            let (eigs, _) = s.eigen();
            let trace = s.as_mat().trace();
            if eigs[0] < -PSD_TOL * trace.abs() {
                return Err(Error::NotSpd { min_eig: eigs[0], max_eig: eigs[eigs.len() - 1] });
            }
        }
        Ok(Self { times, samples, samples_per_cov })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitFamily {
    OmtClosedForm,
    FisherRaoOde,
    WlsNoiselessRotating { epsilon: f64 },
}

impl FitFamily {
    pub fn has_noise(&self) -> bool {
        !matches!(self, FitFamily::WlsNoiselessRotating { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitModelSpec {
    pub family: FitFamily,
    pub dim: usize,
}

/// Decoded fit parameters. Keeps the Cholesky factor of `P₀` so that
/// encoding a decoded vector gives it back exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    p0: SpdMatrix,
    factor: Mat,
    pi0: SymMatrix,
    noise: f64,
}

impl FitParams {
    /// `noise` is the signed square root of `σ²`.
    pub fn new(p0: SpdMatrix, pi0: SymMatrix, noise: f64) -> Result<Self> {
        if p0.dim() != pi0.dim() {
            return Err(Error::DimensionMismatch { expected: p0.dim(), found: pi0.dim() });
        }
        let factor = p0.as_mat().clone().cholesky().ok_or(Error::NotSpd { min_eig: 0.0, max_eig: 0.0 })?.l();
        Ok(Self { p0, factor, pi0, noise })
    }

    pub fn p0(&self) -> &SpdMatrix {
        &self.p0
    }

    pub fn pi0(&self) -> &SymMatrix {
        &self.pi0
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn sigma(&self) -> f64 {
        self.noise.abs()
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }

    /// Same parameters with a non-negative noise scalar.
    pub fn canonical(mut self) -> Self {
        self.noise = self.noise.abs();
        self
    }
}

impl FitModelSpec {
    pub fn new(family: FitFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive"));
        }
        if let FitFamily::WlsNoiselessRotating { epsilon } = family {
            if epsilon == 0.0 {
                return Err(Error::EpsilonZero);
            }
        }
        Ok(Self { family, dim })
    }

    pub fn parameter_count(&self) -> usize {
        2 * packed_len(self.dim) + usize::from(self.family.has_noise())
    }

    /// `θ ↦ (P₀, Π₀, σ)`. `P₀` is positive definite for every finite `θ`.
    pub fn decode(&self, theta: &[f64]) -> Result<FitParams> {
        if theta.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), found: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = self.dim;
        let m = packed_len(n);
        let mut l = Mat::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                l[(i, j)] = if i == j { theta[idx].exp() } else { theta[idx] };
                idx += 1;
            }
        }
        let p0 = SpdMatrix::new(symmetrize(&(&l * l.transpose())))?;
        let pi0 = SymMatrix::from_upper(n, &theta[m..2 * m])?;
        let noise = if self.family.has_noise() { theta[2 * m] } else { 0.0 };
        Ok(FitParams { p0, factor: l, pi0, noise })
    }

    /// Inverse of [`decode`](Self::decode).
    pub fn encode(&self, params: &FitParams) -> Result<Vec<f64>> {
        let n = self.dim;
        if params.p0.dim() != n || params.pi0.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: params.p0.dim() });
        }
        let l = &params.factor;
        let mut theta = Vec::with_capacity(self.parameter_count());
        for i in 0..n {
            for j in 0..=i {
                theta.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
            }
        }
        theta.extend(pack_upper(params.pi0.as_mat()));
        if self.family.has_noise() {
            theta.push(params.noise);
        }
        Ok(theta)
    }

    pub fn model(&self, params: &FitParams) -> Result<PathModel> {
        Ok(match self.family {
            FitFamily::OmtClosedForm => {
                PathModel::Omt(OmtModel::new(params.p0.clone(), params.sigma(), params.pi0.clone())?)
            }
            FitFamily::FisherRaoOde => {
                PathModel::FrOde { p0: params.p0.clone(), pi0: params.pi0.clone(), sigma: params.sigma() }
            }
            FitFamily::WlsNoiselessRotating { epsilon } => {
                PathModel::WlsNoiseless { p0: params.p0.clone(), pi0: params.pi0.clone(), epsilon }
            }
        })
    }
}

/// Draws `n_samples` zero-mean Gaussian vectors with covariance `P_{t_k}` at
/// each time and records their second-moment matrix.
pub fn generate_synthetic(model: &PathModel, times: &[f64], n_samples: usize, seed: u64) -> Result<FitDataset> {
    let n = model.dim();
    if n_samples < n + 1 {
        return Err(Error::InvalidArgument("need at least dim + 1 samples per covariance"));
    }
    let path = sample_at(model, times, &IvpOptions::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(times.len());
    let mut z = vec![0.0; n];
    for p in &path.covariances {
        let root = sqrt_spd(p);
        let mut acc = Mat::zeros(n, n);
        for _ in 0..n_samples {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = root.as_mat() * Mat::from_column_slice(n, 1, &z);
            acc += &x * x.transpose();
        }
        samples.push(SymMatrix::from_symmetric_part(&(acc / n_samples as f64)));
    }
    FitDataset::new(times.to_vec(), samples, Some(n_samples))
}

/// `Σₖ ‖P_{t_k} - P̃_{t_k}‖²_F / Σₖ ‖P̃_{t_k}‖²_F`.
pub fn normalized_error(dataset: &FitDataset, fitted: &[Mat]) -> Result<f64> {
    if fitted.len() != dataset.len() {
        return Err(Error::DimensionMismatch { expected: dataset.len(), found: fitted.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, s) in fitted.iter().zip(&dataset.samples) {
        num += (p - s.as_mat()).norm_squared();
        den += s.as_mat().norm_squared();
    }
    Ok(num / den)
}

/// Normalized error of the dataset against the path it was drawn from.
pub fn sampling_noise_floor(dataset: &FitDataset, truth: &PathModel) -> Result<f64> {
    let path = sample_at(truth, &dataset.times, &IvpOptions::default())?;
    let mats: Vec<Mat> = path.covariances.iter().map(|p| p.as_mat().clone()).collect();
    normalized_error(dataset, &mats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub lm: LmOptions,
    pub ivp: IvpOptions,
    /// Standard deviation of the start perturbations, in parameter units.
    pub perturbation: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 4,
            seed: 0,
            lm: LmOptions { max_iterations: 200, x_tol: 1e-12, f_tol: 1e-12, ..LmOptions::default() },
            ivp: IvpOptions::with_tolerances(1e-8, 1e-11),
            perturbation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    pub theta: Vec<f64>,
    /// Fitted path at the dataset times.
    pub path: CovariancePath,
    /// `Σₖ ‖P_{t_k} - P̃_{t_k}‖²_F`
    pub objective: f64,
    pub normalized_error: f64,
    pub start_index: usize,
    pub iterations: usize,
}

/// Moment-based starting point: `P₀` from the first sample and `Π₀` from a
/// closed-form path between the first and last samples. For the transport
/// family that is the transport costate. The other families also try
/// `P₀⁻¹Π` (matching the transport system matrix at `t = 0`) and the noiseless
/// Fisher-Rao geodesic. For families with noise, `σ` comes from a geometric
/// scan; zero is excluded since it is a stationary point of `σ = |s|`. The
/// candidate with the lowest objective wins.
pub fn initial_params(dataset: &FitDataset, spec: &FitModelSpec, ivp: &IvpOptions) -> Result<FitParams> {
    let n = spec.dim;
    let first = regularize(&dataset.samples[0])?;
    let last = regularize(&dataset.samples[dataset.len() - 1])?;
    let geodesic = {
        let w = inv_sqrt_spd(&first);
        let m = SpdMatrix::new(symmetrize(&(w.as_mat() * last.as_mat() * w.as_mat())))?;
        SymMatrix::from_symmetric_part(&(w.as_mat() * log_spd(&m).as_mat() * w.as_mat() * -0.5))
    };
    let costates = |sigma: f64| -> Vec<SymMatrix> {
        let Ok(omt) = solve_pi0(&first, &last, sigma) else {
            return vec![geodesic.clone()];
        };
        match spec.family {
            FitFamily::OmtClosedForm => vec![omt],
            _ => {
                let mut out = vec![geodesic.clone()];
                if let Some(scaled) = solve(first.as_mat(), omt.as_mat()) {
                    out.push(SymMatrix::from_symmetric_part(&scaled));
                }
                out
            }
        }
    };

    let sigmas: Vec<f64> = if spec.family.has_noise() {
        let (tr0, tr1) = (first.as_mat().trace(), last.as_mat().trace());
        let reference = ((tr1 - tr0).abs().max(tr0) / n as f64).sqrt();
        (0..=12).map(|k| reference * 0.05 * 2f64.powf(0.5 * k as f64)).collect()
    } else {
        vec![0.0]
    };
    let mut best: Option<(f64, FitParams)> = None;
    let mut fallback = None;
    let mut out = Vec::new();
    for &sigma in &sigmas {
        for pi0 in costates(sigma) {
            let Ok(params) = FitParams::new(first.clone(), pi0, sigma) else { continue };
            if fallback.is_none() {
                fallback = Some(params.clone());
            }
            let Ok(theta) = spec.encode(&params) else { continue };
            if residuals(dataset, spec, ivp, &theta, &mut out).is_err() {
                continue;
            }
            let objective: f64 = out.iter().map(|r| r * r).sum();
            if objective.is_finite() && best.as_ref().is_none_or(|(b, _)| objective < *b) {
                best = Some((objective, params));
            }
        }
    }
    best.map(|(_, p)| p).or(fallback).ok_or(Error::AllStartsFailed)
}

fn regularize(s: &SymMatrix) -> Result<SpdMatrix> {
    let (eigs, _) = s.eigen();
    let top = eigs[eigs.len() - 1].max(f64::MIN_POSITIVE);
    let floor = 1e-6 * top;
    SpdMatrix::new(crate::linalg::spectral_map(s.as_mat(), |x| x.max(floor)))
}

/// Starting vector for start `index`: the moment-based point for index 0,
/// a seeded Gaussian perturbation of it otherwise.
pub fn start_vector(dataset: &FitDataset, spec: &FitModelSpec, options: &FitOptions, index: usize) -> Result<Vec<f64>> {
    let mut theta = spec.encode(&initial_params(dataset, spec, &options.ivp)?)?;
    if index > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(index as u64);
        for v in theta.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += options.perturbation * z;
        }
    }
    Ok(theta)
}

fn residuals(
    dataset: &FitDataset,
    spec: &FitModelSpec,
    ivp: &IvpOptions,
    theta: &[f64],
    out: &mut Vec<f64>,
) -> Result<()> {
    let params = spec.decode(theta)?;
    let model = spec.model(&params)?;
    let path = sample_at(&model, &dataset.times, ivp)?;
    out.clear();
    let n = spec.dim;
    for (p, s) in path.covariances.iter().zip(&dataset.samples) {
        let d = p.as_mat() - s.as_mat();
        for i in 0..n {
            for j in i..n {
                let w = if i == j { 1.0 } else { core::f64::consts::SQRT_2 };
                out.push(w * d[(i, j)]);
            }
        }
    }
    Ok(())
}

/// The residual vector whose squared norm is the fit objective.
pub fn residual_vector(
    dataset: &FitDataset,
    spec: &FitModelSpec,
    options: &FitOptions,
    theta: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    residuals(dataset, spec, &options.ivp, theta, &mut out)?;
    Ok(out)
}

/// Runs Levenberg-Marquardt from start `index`.
pub fn fit_start(dataset: &FitDataset, spec: &FitModelSpec, options: &FitOptions, index: usize) -> Result<FitResult> {
    if spec.dim != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), found: spec.dim });
    }
    let theta0 = start_vector(dataset, spec, options, index)?;
    let f = |x: &[f64], out: &mut Vec<f64>| residuals(dataset, spec, &options.ivp, x, out);
    let report = levenberg_marquardt(f, &theta0, &options.lm)?;
    let params = spec.decode(&report.x)?;
    let params = params.canonical();
    let model = spec.model(&params)?;
    let path = sample_at(&model, &dataset.times, &options.ivp)?;
    let mats: Vec<Mat> = path.covariances.iter().map(|p| p.as_mat().clone()).collect();
    Ok(FitResult {
        normalized_error: normalized_error(dataset, &mats)?,
        objective: report.residual_norm * report.residual_norm,
        theta: spec.encode(&params)?,
        params,
        path,
        start_index: index,
        iterations: report.iterations,
    })
}

/// Lowest objective among the per-start results; ties go to the lowest start
/// index.
pub fn select_best(results: Vec<Result<FitResult>>) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    for result in results.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some(b) => {
                result.objective < b.objective
                    || (result.objective == b.objective && result.start_index < b.start_index)
            }
        };
        if better {
            best = Some(result);
        }
    }
    best.ok_or(Error::AllStartsFailed)
}

/// Fits `spec` to `dataset` from `options.starts` starting points, one after
/// another.
pub fn fit_model(dataset: &FitDataset, spec: &FitModelSpec, options: &FitOptions) -> Result<FitResult> {
    let results = (0..options.starts.max(1)).map(|i| fit_start(dataset, spec, options, i)).collect();
    select_best(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trip() {
        let spec = FitModelSpec::new(FitFamily::OmtClosedForm, 2).unwrap();
        let params = FitParams::new(
            SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 0.5]).unwrap(),
            SymMatrix::from_row_slice(2, &[0.1, -0.2, -0.2, 0.4]).unwrap(),
            0.7,
        )
        .unwrap();
        let theta = spec.encode(&params).unwrap();
        assert_eq!(theta.len(), spec.parameter_count());
        let back = spec.decode(&theta).unwrap();
        assert!((back.p0().as_mat() - params.p0().as_mat()).norm() < 1e-14);
        assert_eq!(back.pi0(), params.pi0());
        assert_eq!(back.noise(), 0.7);
    }

    #[test]
    fn noiseless_family_has_no_noise_parameter() {
        let spec = FitModelSpec::new(FitFamily::WlsNoiselessRotating { epsilon: 20.0 }, 3).unwrap();
        assert_eq!(spec.parameter_count(), 12);
        assert!(FitModelSpec::new(FitFamily::WlsNoiselessRotating { epsilon: 0.0 }, 3).is_err());
    }

    #[test]
    fn normalized_error_cases() {
        let s = SymMatrix::from_row_slice(2, &[2.0, 0.1, 0.1, 1.0]).unwrap();
        let dataset = FitDataset::new(vec![0.0, 1.0], vec![s.clone(), s.clone()], None).unwrap();
        let exact = vec![s.as_mat().clone(); 2];
        assert_eq!(normalized_error(&dataset, &exact).unwrap(), 0.0);
        let zero = vec![Mat::zeros(2, 2); 2];
        assert_eq!(normalized_error(&dataset, &zero).unwrap(), 1.0);
    }

    #[test]
    fn dataset_validation() {
        let s = SymMatrix::identity(2);
        assert!(FitDataset::new(vec![0.0], vec![s.clone()], None).is_err());
        assert!(FitDataset::new(vec![0.5, 0.5], vec![s.clone(), s.clone()], None).is_err());
        let indefinite = SymMatrix::from_diagonal(&[1.0, -0.1]);
        assert!(FitDataset::new(vec![0.0, 1.0], vec![s, indefinite], None).is_err());
    }

    #[test]
    fn two_exact_endpoints_interpolate() {
        let p0 = SpdMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
        let p1 = SpdMatrix::from_row_slice(2, &[0.6, -0.1, -0.1, 1.2]).unwrap();
        let dataset = FitDataset::new(vec![0.0, 1.0], vec![p0.to_sym(), p1.to_sym()], None).unwrap();
        let spec = FitModelSpec::new(FitFamily::OmtClosedForm, 2).unwrap();
        let options = FitOptions { starts: 1, ..FitOptions::default() };
        let fit = fit_model(&dataset, &spec, &options).unwrap();
        assert!(fit.normalized_error < 1e-16, "{}", fit.normalized_error);
    }

    #[test]
    fn synthetic_generator_is_seeded() {
        let model = PathModel::Omt(OmtModel::between(&SpdMatrix::identity(2), &SpdMatrix::identity(2), 0.5).unwrap());
        let a = generate_synthetic(&model, &[0.0, 0.5, 1.0], 50, 11).unwrap();
        let b = generate_synthetic(&model, &[0.0, 0.5, 1.0], 50, 11).unwrap();
        assert_eq!(a, b);
        assert!(generate_synthetic(&model, &[0.0, 1.0], 2, 0).is_err());
    }
}
