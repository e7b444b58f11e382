//! Rayon drivers for the embarrassingly parallel parts: Monte Carlo chunks
//! and fit multi-starts. Both reduce in a fixed order, so results do not
//! depend on the thread count.

use covpath_core::fit::{fit_start, select_best, FitDataset, FitModelSpec, FitOptions, FitResult};
use covpath_core::montecarlo::{EnsembleSpec, SimulationPlan};
use covpath_core::{Result, SymMatrix};
use rayon::prelude::*;

/// Parallel [`covpath_core::montecarlo::simulate_ensemble`].
pub fn simulate_ensemble(spec: &EnsembleSpec<'_>, sample_times: &[f64]) -> Result<Vec<SymMatrix>> {
    let plan = SimulationPlan::new(spec, sample_times)?;
    simulate_plan(&plan)
}

pub fn simulate_plan(plan: &SimulationPlan) -> Result<Vec<SymMatrix>> {
    let sums: Vec<Vec<f64>> = (0..plan.chunks()).into_par_iter().map(|c| plan.simulate_chunk(c)).collect();
    plan.finish(sums)
}

/// Parallel [`covpath_core::fit::fit_model`].
pub fn fit_model(dataset: &FitDataset, spec: &FitModelSpec, options: &FitOptions) -> Result<FitResult> {
    let results: Vec<_> =
        (0..options.starts.max(1)).into_par_iter().map(|i| fit_start(dataset, spec, options, i)).collect();
    select_best(results)
}
