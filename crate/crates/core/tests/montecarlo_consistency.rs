mod common;

use common::endpoints;
use covpath_core::montecarlo::{covariance_discrepancy, simulate_ensemble, EnsembleSpec, SimulationPlan};
use covpath_core::omt::{path_at, OmtModel};
use covpath_core::{SpdMatrix, SquareMatrix};

fn omt_policy(model: &OmtModel) -> impl Fn(f64) -> covpath_core::Result<SquareMatrix> + '_ {
    move |t| path_at(model, t).map(|(_, a)| a)
}

#[test]
fn scalar_transport_variance_matches() {
    let model = OmtModel::between(&SpdMatrix::scalar(6.0).unwrap(), &SpdMatrix::scalar(25.0).unwrap(), 4.0).unwrap();
    let policy = omt_policy(&model);
    let spec =
        EnsembleSpec { policy: &policy, sigma: 4.0, p0: model.p0().clone(), trajectories: 20_000, dt: 1e-3, seed: 17 };
    let emp = simulate_ensemble(&spec, &[0.5, 1.0]).unwrap();
    let mid = path_at(&model, 0.5).unwrap().0;
    assert!((emp[0].as_mat()[(0, 0)] / mid.as_mat()[(0, 0)] - 1.0).abs() < 0.05);
    assert!((emp[1].as_mat()[(0, 0)] / 25.0 - 1.0).abs() < 0.05);
}

#[test]
fn two_dimensional_transport_discrepancy() {
    let (p0, p1) = endpoints();
    let model = OmtModel::between(&p0, &p1, 0.5).unwrap();
    let policy = omt_policy(&model);
    let times = [0.25, 0.5, 0.75, 1.0];
    let spec = EnsembleSpec { policy: &policy, sigma: 0.5, p0: p0.clone(), trajectories: 20_000, dt: 1e-3, seed: 3 };
    let emp = simulate_ensemble(&spec, &times).unwrap();
    let analytic: Vec<SpdMatrix> = times.iter().map(|&t| path_at(&model, t).unwrap().0).collect();
    let d = covariance_discrepancy(&emp, &analytic).unwrap();
    assert!(d.iter().all(|&x| x < 0.05), "{d:?}");
}

#[test]
fn error_shrinks_under_refinement() {
    // Halving dt and quadrupling M at each level; mean over seeds.
    let model = OmtModel::between(&SpdMatrix::scalar(1.0).unwrap(), &SpdMatrix::scalar(9.0).unwrap(), 1.0).unwrap();
    let policy = omt_policy(&model);
    let analytic = [path_at(&model, 1.0).unwrap().0];
    let mut levels = Vec::new();
    for (dt, m) in [(0.01, 500), (0.005, 2_000), (0.0025, 8_000)] {
        let mut total = 0.0;
        for seed in 0..6 {
            let spec = EnsembleSpec { policy: &policy, sigma: 1.0, p0: model.p0().clone(), trajectories: m, dt, seed };
            let emp = simulate_ensemble(&spec, &[1.0]).unwrap();
            total += covariance_discrepancy(&emp, &analytic).unwrap()[0];
        }
        levels.push(total / 6.0);
    }
    assert!(levels[0] > levels[1] && levels[1] > levels[2], "{levels:?}");
}

#[test]
fn chunk_schedule_does_not_change_results() {
    let a = SquareMatrix::from_row_slice(2, &[-0.3, 0.5, -0.5, 0.1]).unwrap();
    let policy = move |_t: f64| Ok(a.clone());
    let spec = EnsembleSpec {
        policy: &policy,
        sigma: 0.7,
        p0: SpdMatrix::identity(2),
        trajectories: 3_000,
        dt: 0.01,
        seed: 5,
    };
    let plan = SimulationPlan::new(&spec, &[0.5, 1.0]).unwrap();
    let forward: Vec<Vec<f64>> = (0..plan.chunks()).map(|c| plan.simulate_chunk(c)).collect();
    let mut backward: Vec<Vec<f64>> = (0..plan.chunks()).rev().map(|c| plan.simulate_chunk(c)).collect();
    backward.reverse();
    let a = plan.finish(forward).unwrap();
    let b = plan.finish(backward).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, simulate_ensemble(&spec, &[0.5, 1.0]).unwrap());
}
