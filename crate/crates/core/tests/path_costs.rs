use covpath_core::fisher_rao::scalar_solve;
use covpath_core::omt::OmtModel;
use covpath_core::path::{path_cost, sample, Objective, PathModel};
use covpath_core::solvers::ode::{integrate_constant_system, IvpOptions};
use covpath_core::{SpdMatrix, SquareMatrix};

fn scalar_paths(p0: f64, p1: f64) -> (PathModel, PathModel) {
    let (a, b) = (SpdMatrix::scalar(p0).unwrap(), SpdMatrix::scalar(p1).unwrap());
    (PathModel::Omt(OmtModel::between(&a, &b, 0.0).unwrap()), PathModel::Scalar(scalar_solve(p0, p1, 0.0).unwrap()))
}

#[test]
fn each_path_is_optimal_for_its_own_objective() {
    for (p0, p1) in [(1.0, 4.0), (4.0, 1.0), (0.5, 3.0)] {
        let (omt, fr) = scalar_paths(p0, p1);
        let (omt, fr) = (sample(&omt, 201).unwrap(), sample(&fr, 201).unwrap());
        assert!(path_cost(&omt, Objective::Omt).unwrap() < path_cost(&fr, Objective::Omt).unwrap());
        assert!(path_cost(&fr, Objective::Info).unwrap() < path_cost(&omt, Objective::Info).unwrap());
    }
}

#[test]
fn closed_form_cost_values() {
    // p = (1 + t)², A = 1/(1 + t): transport cost (√4 - √1)² = 1, information cost 1/2.
    // p = 4^t, A = ln 2: transport cost (ln 2)²·3/ln 4, information cost (ln 2)².
    let (omt, fr) = scalar_paths(1.0, 4.0);
    let (omt, fr) = (sample(&omt, 201).unwrap(), sample(&fr, 201).unwrap());
    let ln2 = std::f64::consts::LN_2;
    assert!((path_cost(&omt, Objective::Omt).unwrap() - 1.0).abs() < 1e-10);
    assert!((path_cost(&omt, Objective::Info).unwrap() - 0.5).abs() < 1e-8);
    assert!((path_cost(&fr, Objective::Info).unwrap() - ln2 * ln2).abs() < 1e-12);
    assert!((path_cost(&fr, Objective::Omt).unwrap() - ln2 * ln2 * 3.0 / (2.0 * ln2)).abs() < 1e-8);
}

#[test]
fn geodesic_to_e_squared_has_unit_information_cost() {
    let fr = sample(&PathModel::Scalar(scalar_solve(1.0, std::f64::consts::E.powi(2), 0.0).unwrap()), 201).unwrap();
    assert!((path_cost(&fr, Objective::Info).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zero_control_costs_nothing() {
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let path =
        integrate_constant_system(&SquareMatrix::zeros(2), &SpdMatrix::identity(2), 0.7, &grid, &IvpOptions::default())
            .unwrap();
    for objective in [Objective::Omt, Objective::Info, Objective::Wls { epsilon: 3.0 }] {
        assert_eq!(path_cost(&path, objective).unwrap(), 0.0);
    }
}
