mod common;

use common::{random_spd, rng};
use covpath_core::linalg::{relative_frobenius, Mat};
use covpath_core::omt::{costate_at, omt_cost, path_at, solve_pi0, OmtModel};
use covpath_core::path::{sample, PathModel};
use covpath_core::{SpdMatrix, SymMatrix};
use rand::Rng;

#[test]
fn endpoint_is_reproduced_for_random_pairs() {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = [1, 2, 5][case % 3];
        let sigma = [0.0, 0.5, 2.0][(case / 3) % 3];
        let p0 = random_spd(&mut r, n, 0.05);
        let p1 = random_spd(&mut r, n, 0.05);
        let model = OmtModel::between(&p0, &p1, sigma).unwrap();
        let (end, _) = path_at(&model, 1.0).unwrap();
        worst = worst.max(relative_frobenius(end.as_mat(), p1.as_mat()));
        let (start, _) = path_at(&model, 0.0).unwrap();
        assert_eq!(start.as_mat(), p0.as_mat());
    }
    assert!(worst < 1e-9, "worst relative error {worst:e}");
}

#[test]
fn path_satisfies_lyapunov_dynamics() {
    let mut r = rng(11);
    let p0 = random_spd(&mut r, 3, 0.2);
    let p1 = random_spd(&mut r, 3, 0.2);
    let sigma = 0.7;
    let model = OmtModel::between(&p0, &p1, sigma).unwrap();
    // The path is quadratic in t, so central differences are exact.
    let h = 1e-3;
    for &t in &[0.2, 0.5, 0.8] {
        let (plus, _) = path_at(&model, t + h).unwrap();
        let (minus, _) = path_at(&model, t - h).unwrap();
        let (p, a) = path_at(&model, t).unwrap();
        let fd = (plus.as_mat() - minus.as_mat()) / (2.0 * h);
        let rhs = a.as_mat() * p.as_mat() + p.as_mat() * a.as_mat().transpose() + Mat::identity(3, 3) * sigma * sigma;
        assert!((fd - &rhs).norm() < 1e-9 * rhs.norm().max(1.0));
    }
}

#[test]
fn costate_follows_riccati_flow() {
    let p0 = SpdMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
    let pi0 = SymMatrix::from_row_slice(2, &[0.4, -0.3, -0.3, 0.1]).unwrap();
    let model = OmtModel::new(p0, 0.5, pi0).unwrap();
    let h = 1e-4;
    for &t in &[0.1, 0.5, 0.9] {
        let plus = costate_at(&model, t + h).unwrap();
        let minus = costate_at(&model, t - h).unwrap();
        let pi = costate_at(&model, t).unwrap();
        let fd = (plus.as_mat() - minus.as_mat()) / (2.0 * h);
        let square = pi.as_mat() * pi.as_mat();
        assert!((fd - square).norm() < 1e-7);
    }
}

#[test]
fn noiseless_diagonal_path_interpolates_square_roots() {
    let p0 = SpdMatrix::from_diagonal(&[1.0, 0.3, 4.0]).unwrap();
    let p1 = SpdMatrix::from_diagonal(&[0.3, 1.0, 9.0]).unwrap();
    let model = OmtModel::between(&p0, &p1, 0.0).unwrap();
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let (p, _) = path_at(&model, t).unwrap();
        for (i, (a, b)) in [(1.0f64, 0.3f64), (0.3, 1.0), (4.0, 9.0)].iter().enumerate() {
            let expected = ((1.0 - t) * a.sqrt() + t * b.sqrt()).powi(2);
            assert!((p.as_mat()[(i, i)] - expected).abs() < 1e-12);
        }
        assert!(p.as_mat()[(0, 1)].abs() < 1e-14);
    }
}

#[test]
fn system_matrix_annihilates_costate_null_space() {
    // Π₀ = v v' scaled, singular with null space spanned by w.
    let v = Mat::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
    let pi0 = SymMatrix::from_symmetric_part(&(&v * v.transpose() * 0.1));
    let p0 = SpdMatrix::from_row_slice(3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 1.5]).unwrap();
    let model = OmtModel::new(p0, 0.8, pi0).unwrap();
    let nulls = [Mat::from_column_slice(3, 1, &[2.0, -1.0, 0.0]), Mat::from_column_slice(3, 1, &[1.0, 0.0, 1.0])];
    for k in 0..=10 {
        let (_, a) = path_at(&model, k as f64 / 10.0).unwrap();
        for w in &nulls {
            assert!((a.as_mat() * w).norm() < 1e-10);
        }
    }
}

#[test]
fn scalar_noiseless_cost() {
    let p0 = SpdMatrix::scalar(1.0).unwrap();
    let p1 = SpdMatrix::scalar(4.0).unwrap();
    let path = sample(&PathModel::Omt(OmtModel::between(&p0, &p1, 0.0).unwrap()), 201).unwrap();
    assert!((omt_cost(&path).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn costate_bound_is_enforced() {
    let p0 = SpdMatrix::identity(2);
    let pi0 = SymMatrix::from_diagonal(&[1.5, 0.0]);
    assert!(OmtModel::new(p0, 0.5, pi0).is_err());
}

#[test]
fn solved_costate_is_symmetric_and_bounded() {
    let mut r = rng(3);
    for _ in 0..50 {
        let n = r.random_range(1..5);
        let p0 = random_spd(&mut r, n, 0.05);
        let p1 = random_spd(&mut r, n, 0.05);
        let sigma = r.random_range(0.0..2.0);
        let pi0 = solve_pi0(&p0, &p1, sigma).unwrap();
        assert!(pi0.max_eigenvalue() < 1.0);
    }
}
