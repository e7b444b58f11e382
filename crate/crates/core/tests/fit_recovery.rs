mod common;

use common::rng;
use covpath_core::fit::{fit_model, generate_synthetic, residual_vector, FitFamily, FitModelSpec, FitOptions};
use covpath_core::linalg::Mat;
use covpath_core::omt::OmtModel;
use covpath_core::path::PathModel;
use covpath_core::solvers::lm::{central_jacobian, forward_jacobian};
use covpath_core::{SpdMatrix, SymMatrix};
use rand::Rng;

fn families() -> [FitFamily; 3] {
    [FitFamily::OmtClosedForm, FitFamily::FisherRaoOde, FitFamily::WlsNoiselessRotating { epsilon: 20.0 }]
}

fn truth() -> (SpdMatrix, f64, PathModel) {
    let p0 = SpdMatrix::from_row_slice(3, &[3.0, 0.4, 0.1, 0.4, 1.0, -0.1, 0.1, -0.1, 0.25]).unwrap();
    let pi0 = SymMatrix::from_row_slice(3, &[0.6, 0.2, 0.0, 0.2, 0.3, 0.1, 0.0, 0.1, -0.5]).unwrap();
    let sigma = 3.0;
    let model = PathModel::Omt(OmtModel::new(p0.clone(), sigma, pi0).unwrap());
    (p0, sigma, model)
}

fn times() -> Vec<f64> {
    (0..10).map(|k| k as f64 / 9.0).collect()
}

#[test]
fn parameterization_round_trips() {
    let mut r = rng(1);
    for i in 0..1000 {
        let family = families()[i % 3];
        let n = 1 + i % 4;
        let spec = FitModelSpec::new(family, n).unwrap();
        let theta: Vec<f64> = (0..spec.parameter_count()).map(|_| r.random_range(-2.0..2.0)).collect();
        let params = spec.decode(&theta).unwrap();
        assert!(params.p0().as_mat().clone().cholesky().is_some());
        let back = spec.encode(&params).unwrap();
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{family:?} n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn forward_jacobian_agrees_with_central_differences() {
    let (_, _, model) = truth();
    let data = generate_synthetic(&model, &times(), 1_000, 4).unwrap();
    let mut r = rng(8);
    for family in families() {
        let spec = FitModelSpec::new(family, 3).unwrap();
        let options = FitOptions::default();
        for _ in 0..3 {
            let mut theta: Vec<f64> = covpath_core::fit::start_vector(&data, &spec, &options, 0).unwrap();
            for v in theta.iter_mut() {
                *v += r.random_range(-0.05..0.05);
            }
            let mut f = |x: &[f64], out: &mut Vec<f64>| {
                *out = residual_vector(&data, &spec, &options, x)?;
                Ok(())
            };
            let mut r0 = Vec::new();
            f(&theta, &mut r0).unwrap();
            let forward = forward_jacobian(&mut f, &theta, &r0, 1e-6).unwrap();
            let central: Mat = central_jacobian(&mut f, &theta, 1e-5).unwrap();
            let rel = (&forward - &central).norm() / central.norm();
            assert!(rel < 1e-4, "{family:?}: {rel:e}");
        }
    }
}

#[test]
fn recovery_improves_with_sample_size() {
    let (p0, sigma, model) = truth();
    let spec = FitModelSpec::new(FitFamily::OmtClosedForm, 3).unwrap();
    let mut votes = 0;
    for seed in 0..5 {
        let mut errors = Vec::new();
        for n in [100, 1_000, 10_000] {
            let data = generate_synthetic(&model, &times(), n, 100 + seed).unwrap();
            let fit = fit_model(&data, &spec, &FitOptions { seed, ..FitOptions::default() }).unwrap();
            let p_err = (fit.params.p0().as_mat() - p0.as_mat()).norm() / p0.as_mat().norm();
            let s_err = (fit.params.sigma().powi(2) / (sigma * sigma) - 1.0).abs();
            errors.push(p_err + s_err);
        }
        if errors[0] > errors[1] && errors[1] > errors[2] {
            votes += 1;
        }
    }
    assert!(votes >= 3, "{votes} of 5 seeds decreased monotonically");
}

#[test]
fn near_noiseless_data_recovers_parameters() {
    let (p0, sigma, model) = truth();
    let data = generate_synthetic(&model, &times(), 100_000, 21).unwrap();
    let spec = FitModelSpec::new(FitFamily::OmtClosedForm, 3).unwrap();
    let fit = fit_model(&data, &spec, &FitOptions::default()).unwrap();
    let p_err = (fit.params.p0().as_mat() - p0.as_mat()).norm() / p0.as_mat().norm();
    let s_err = (fit.params.sigma().powi(2) / (sigma * sigma) - 1.0).abs();
    assert!(p_err < 0.02 && s_err < 0.02, "{p_err} {s_err}");
}

#[test]
fn every_family_fits_the_same_dataset() {
    let (_, _, model) = truth();
    let data = generate_synthetic(&model, &times(), 2_000, 9).unwrap();
    for family in families() {
        let spec = FitModelSpec::new(family, 3).unwrap();
        let fit = fit_model(&data, &spec, &FitOptions { starts: 2, ..FitOptions::default() }).unwrap();
        assert!(fit.objective.is_finite() && fit.normalized_error.is_finite(), "{family:?}");
        assert!(fit.normalized_error < 1.0, "{family:?}: {}", fit.normalized_error);
    }
}

#[test]
fn constant_path_sample_mean_concentrates() {
    let p = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
    let model = PathModel::Omt(OmtModel::new(p.clone(), 0.0, SymMatrix::zeros(2)).unwrap());
    let data = generate_synthetic(&model, &times(), 200, 2).unwrap();
    let mean = data.samples.iter().fold(Mat::zeros(2, 2), |acc, s| acc + s.as_mat()) / 10.0;
    let rel = (mean - p.as_mat()).norm() / p.as_mat().norm();
    assert!(rel < 3.0 * 2.0 / (10.0f64 * 200.0).sqrt(), "{rel}");
}
