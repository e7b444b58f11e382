//! Euler-Maruyama ensembles of `dx = A_t x dt + σ dw`.
//!
//! Trajectory `i` draws from its own ChaCha stream keyed by `(seed, i)`, and
//! trajectories are summed in fixed chunks that are then combined by pairwise
//! reduction in chunk order. Any schedule that evaluates the same chunks
//! therefore produces bit-identical results.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{packed_len, relative_frobenius, sqrt_spd, unpack_upper, Mat, SpdMatrix, SquareMatrix, SymMatrix};

#[allow(unused_imports)]
use num_traits::Float;

/// Trajectories per reduction chunk.
pub const CHUNK: usize = 512;

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 0.01;

pub struct EnsembleSpec<'a> {
    /// The control `A_t`.
    pub policy: &'a dyn Fn(f64) -> Result<SquareMatrix>,
    pub sigma: f64,
    pub p0: SpdMatrix,
    pub trajectories: usize,
    pub dt: f64,
    pub seed: u64,
}

/// An ensemble with the control tabulated on the time-step grid. Shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    n: usize,
    steps: usize,
    h: f64,
    sigma: f64,
    /// Column-major `A(t_k)` for `k < steps`, concatenated.
    controls: Vec<f64>,
    p0_root: Mat,
    /// Step index of each sample time, increasing.
    sample_steps: Vec<usize>,
    trajectories: usize,
    seed: u64,
}

impl SimulationPlan {
    /// The time step is `1/N` with `N = ⌈1/dt⌉`; sample times must lie on
    /// that grid.
    pub fn new(spec: &EnsembleSpec<'_>, sample_times: &[f64]) -> Result<Self> {
        if spec.trajectories == 0 {
            return Err(Error::InvalidArgument("at least one trajectory is required"));
        }
        if !(spec.dt > 0.0 && spec.dt <= MAX_DT) {
            return Err(Error::InvalidArgument("dt must lie in (0, 0.01]"));
        }
        if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
            return Err(Error::InvalidArgument("sigma must be finite and non-negative"));
        }
        let steps_per_unit = (1.0 / spec.dt - 1e-9).ceil() as usize;
        let h = 1.0 / steps_per_unit as f64;
        let mut sample_steps = Vec::with_capacity(sample_times.len());
        for (k, &t) in sample_times.iter().enumerate() {
            let idx = (t * steps_per_unit as f64).round();
            if !(0.0..=1.0).contains(&t) || (idx * h - t).abs() > 1e-9 || (k > 0 && t <= sample_times[k - 1]) {
                return Err(Error::InvalidTime { t });
            }
            sample_steps.push(idx as usize);
        }
        let steps = sample_steps.last().copied().unwrap_or(0);
        let n = spec.p0.dim();
        let mut controls = Vec::with_capacity(steps * n * n);
        for k in 0..steps {
            let a = (spec.policy)(k as f64 * h)?;
            if a.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.dim() });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            controls.extend(a.as_mat().iter());
        }
        Ok(Self {
            n,
            steps,
            h,
            sigma: spec.sigma,
            controls,
            p0_root: sqrt_spd(&spec.p0).into_mat(),
            sample_steps,
            trajectories: spec.trajectories,
            seed: spec.seed,
        })
    }

    pub fn chunks(&self) -> usize {
        self.trajectories.div_ceil(CHUNK)
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Packed sums of `x x'` over the trajectories of chunk `chunk`, one block
    /// per sample time.
    pub fn simulate_chunk(&self, chunk: usize) -> Vec<f64> {
        let n = self.n;
        let m = packed_len(n);
        let mut sums = vec![0.0; m * self.sample_steps.len()];
        let first = chunk * CHUNK;
        let last = (first + CHUNK).min(self.trajectories);
        let noise = self.sigma * self.h.sqrt();
        let mut x = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut next = vec![0.0; n];

        for traj in first..last {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(traj as u64);
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for (i, xi_mapped) in x.iter_mut().enumerate() {
                *xi_mapped = (0..n).map(|j| self.p0_root[(i, j)] * xi[j]).sum();
            }
            let mut sample = 0;
            for k in 0..=self.steps {
                while sample < self.sample_steps.len() && self.sample_steps[sample] == k {
                    let block = &mut sums[sample * m..(sample + 1) * m];
                    let mut idx = 0;
                    for i in 0..n {
                        for j in i..n {
                            block[idx] += x[i] * x[j];
                            idx += 1;
                        }
                    }
                    sample += 1;
                }
                if k == self.steps {
                    break;
                }
                let a = &self.controls[k * n * n..(k + 1) * n * n];
                for i in 0..n {
                    let ax: f64 = (0..n).map(|j| a[j * n + i] * x[j]).sum();
                    next[i] = x[i] + ax * self.h;
                }
                if noise != 0.0 {
                    for v in next.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v += noise * z;
                    }
                }
                core::mem::swap(&mut x, &mut next);
            }
        }
        sums
    }

    /// Combines chunk sums (in chunk order) into second-moment matrices.
    pub fn finish(&self, chunk_sums: Vec<Vec<f64>>) -> Result<Vec<SymMatrix>> {
        if chunk_sums.len() != self.chunks() {
            return Err(Error::DimensionMismatch { expected: self.chunks(), found: chunk_sums.len() });
        }
        let total = pairwise_sum(chunk_sums);
        let m = packed_len(self.n);
        let scale = 1.0 / self.trajectories as f64;
        total
            .chunks(m)
            .map(|block| {
                let scaled: Vec<f64> = block.iter().map(|v| v * scale).collect();
                Ok(SymMatrix::from_symmetric_part(&unpack_upper(self.n, &scaled)?))
            })
            .collect()
    }
}

fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut merged = Vec::with_capacity(parts.len().div_ceil(2));
        let mut iter = parts.into_iter();
        while let Some(mut left) = iter.next() {
            if let Some(right) = iter.next() {
                left.iter_mut().zip(&right).for_each(|(a, b)| *a += b);
            }
            merged.push(left);
        }
        parts = merged;
    }
    parts.pop().unwrap_or_default()
}

/// Empirical second moments `(1/M) Σ x x'` at each sample time.
pub fn simulate_ensemble(spec: &EnsembleSpec<'_>, sample_times: &[f64]) -> Result<Vec<SymMatrix>> {
    let plan = SimulationPlan::new(spec, sample_times)?;
    let sums = (0..plan.chunks()).map(|c| plan.simulate_chunk(c)).collect();
    plan.finish(sums)
}

/// `‖P̂_t - P_t‖_F / ‖P_t‖_F` per sample.
pub fn covariance_discrepancy(empirical: &[SymMatrix], analytic: &[SpdMatrix]) -> Result<Vec<f64>> {
    if empirical.len() != analytic.len() {
        return Err(Error::DimensionMismatch { expected: analytic.len(), found: empirical.len() });
    }
    empirical
        .iter()
        .zip(analytic)
        .map(|(e, a)| {
            if e.dim() != a.dim() {
                return Err(Error::DimensionMismatch { expected: a.dim(), found: e.dim() });
            }
            Ok(relative_frobenius(e.as_mat(), a.as_mat()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_policy(n: usize) -> impl Fn(f64) -> Result<SquareMatrix> {
        move |_| Ok(SquareMatrix::zeros(n))
    }

    #[test]
    fn pure_diffusion_adds_sigma_squared_t() {
        let policy = zero_policy(2);
        let spec = EnsembleSpec {
            policy: &policy,
            sigma: 1.0,
            p0: SpdMatrix::identity(2),
            trajectories: 20_000,
            dt: 0.01,
            seed: 7,
        };
        let cov = simulate_ensemble(&spec, &[1.0]).unwrap();
        let err = (cov[0].as_mat() - Mat::identity(2, 2) * 2.0).abs().max();
        assert!(err < 0.1, "entrywise error {err}");
    }

    #[test]
    fn deterministic_linear_flow() {
        let a = 0.7;
        let policy = move |_: f64| SquareMatrix::from_row_slice(1, &[a]);
        let spec = EnsembleSpec {
            policy: &policy,
            sigma: 0.0,
            p0: SpdMatrix::scalar(2.0).unwrap(),
            trajectories: 20_000,
            dt: 1e-3,
            seed: 1,
        };
        let cov = simulate_ensemble(&spec, &[0.5, 1.0]).unwrap();
        let exact = 2.0 * (2.0 * a).exp();
        assert!((cov[1][(0, 0)] - exact).abs() / exact < 0.05);
    }

    #[test]
    fn same_seed_same_bits() {
        let policy = zero_policy(2);
        let spec = EnsembleSpec {
            policy: &policy,
            sigma: 0.5,
            p0: SpdMatrix::identity(2),
            trajectories: 1500,
            dt: 0.01,
            seed: 99,
        };
        let a = simulate_ensemble(&spec, &[0.5, 1.0]).unwrap();
        let b = simulate_ensemble(&spec, &[0.5, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_noiseless_trajectory_follows_euler() {
        let policy = |_: f64| SquareMatrix::from_row_slice(1, &[-1.0]);
        let spec = EnsembleSpec {
            policy: &policy,
            sigma: 0.0,
            p0: SpdMatrix::scalar(1.0).unwrap(),
            trajectories: 1,
            dt: 0.01,
            seed: 3,
        };
        let plan = SimulationPlan::new(&spec, &[0.0, 1.0]).unwrap();
        let sums = plan.simulate_chunk(0);
        let x0_sq = sums[0];
        let expected = x0_sq * (1.0 - 0.01_f64).powi(200);
        assert!((sums[1] - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn sample_times_must_be_on_grid() {
        let policy = zero_policy(1);
        let spec = EnsembleSpec {
            policy: &policy,
            sigma: 1.0,
            p0: SpdMatrix::identity(1),
            trajectories: 2,
            dt: 0.01,
            seed: 0,
        };
        assert!(SimulationPlan::new(&spec, &[0.005]).is_err());
        let spec = EnsembleSpec { dt: 0.02, ..spec };
        assert!(SimulationPlan::new(&spec, &[0.5]).is_err());
    }

    #[test]
    fn discrepancy_formula() {
        let p = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let same = covariance_discrepancy(&[p.to_sym()], core::slice::from_ref(&p)).unwrap();
        assert_eq!(same, alloc::vec![0.0]);
        let delta = 0.1;
        let shifted = SymMatrix::from_symmetric_part(&(p.as_mat() + Mat::identity(2, 2) * delta));
        let d = covariance_discrepancy(&[shifted], core::slice::from_ref(&p)).unwrap();
        let expected = delta * 2.0_f64.sqrt() / p.as_mat().norm();
        assert!((d[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let parts = alloc::vec![alloc::vec![1.0], alloc::vec![2.0], alloc::vec![3.0]];
        assert_eq!(pairwise_sum(parts), alloc::vec![6.0]);
    }
}
