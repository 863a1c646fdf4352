//! Nine-dimensional Gaussian benchmark with a known evidence.
//!
//! With `V(x) = |x|^2 / 2`, `beta = 1` and a box of edge 10 the integral of
//! `exp(-V)` over the box is `(2 pi)^(9/2)` to within 1e-11 relative.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{aggregate_runs, run_seed};
use crate::potentials::PotentialModel;
use crate::sampler::{ns_run, NsParams, Termination};

pub const SELFTEST_DIM: usize = 9;
pub const SELFTEST_BOX: f64 = 10.0;

/// `(2 pi)^(9/2)`.
pub fn selftest_exact() -> f64 {
    (2.0 * std::f64::consts::PI).powf(SELFTEST_DIM as f64 / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub live_points: usize,
    pub walk_steps: usize,
    pub n_runs: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sigma_of_mean: f64,
    pub exact: f64,
    pub relative_deviation: f64,
    pub iterations_mean: f64,
}

/// Runs the benchmark `n_runs` times in parallel.
pub fn selftest_i9(
    live_points: usize,
    walk_steps: usize,
    n_runs: usize,
    seed: u64,
    walkers: usize,
) -> Result<SelftestReport> {
    if n_runs < 2 {
        return Err(Error::invalid("selftest needs at least two runs"));
    }
    let pot = PotentialModel::gaussian_test(SELFTEST_DIM)?;
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let params = NsParams {
                live_points,
                walk_steps,
                box_length: SELFTEST_BOX,
                walkers,
                seed: run_seed(seed, 0, r),
                ..NsParams::default()
            };
            let trace = ns_run(&pot, 1.0, &params);
            if let Termination::Aborted { reason } = &trace.termination {
                return Err(Error::RunAborted { reason: reason.clone(), trace: Box::new(trace) });
            }
            let q = (trace.log_evidence + SELFTEST_DIM as f64 * SELFTEST_BOX.ln()).exp();
            Ok((q, trace.iterations))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (mean, sigma_of_mean) = aggregate_runs(&values)?;
    let exact = selftest_exact();
    Ok(SelftestReport {
        live_points,
        walk_steps,
        n_runs,
        mean,
        sigma_of_mean,
        exact,
        relative_deviation: (mean - exact) / exact,
        iterations_mean: runs.iter().map(|r| r.1 as f64).sum::<f64>() / n_runs as f64,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_value() {
        assert!((selftest_exact() - 3906.69).abs() < 0.01);
    }

    #[test]
    fn small_run_is_close() {
        let rep = selftest_i9(200, 200, 4, 11, 1).unwrap();
        assert!(rep.relative_deviation.abs() < 0.25, "{rep:?}");
        assert_eq!(rep.values.len(), 4);
    }
}
