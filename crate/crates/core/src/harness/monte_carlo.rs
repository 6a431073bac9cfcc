//! Repeated noisy trials comparing estimators on identical measurement sets.

use super::indices::{perf_indices, Indices};
use super::placement::Placement;
use super::simulate::{simulate_measurements, NoiseSpec};
use crate::estimators::{run, EstimationResult, EstimatorConfig, EstimatorKind};
use crate::measurement::{eval_h, Measurement, MeasurementKind};
use crate::network::{Grid, StateVector};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct MonteCarloConfig {
    pub trials: usize,
    /// Trial `k` draws its noise from `seed + k`.
    pub seed: u64,
    pub noise: NoiseSpec,
    pub estimator: EstimatorConfig,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            trials: 200,
            seed: 1,
            noise: NoiseSpec::default(),
            estimator: EstimatorConfig::default(),
            estimators: EstimatorKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorTrial {
    pub kind: EstimatorKind,
    pub indices: Indices,
    pub iterations: usize,
    /// Assembly, factorization and solve time in seconds.
    pub time: f64,
    pub zero_injection_mismatch: f64,
    pub conjugate_defect: (f64, f64),
    pub matrix_size: usize,
    pub matrix_nnz: usize,
}

#[derive(Clone, Debug)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub runs: Vec<EstimatorTrial>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    pub mean_xi_z: f64,
    pub mean_sigma_x2: f64,
    pub mean_iterations: f64,
    /// Mean assembly + factor + solve time, milliseconds.
    pub mean_time_ms: f64,
    pub matrix_size: usize,
    pub matrix_nnz: usize,
    pub max_zero_injection_mismatch: f64,
    pub max_conjugate_defect: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub trials_requested: usize,
    pub trials: Vec<TrialReport>,
    /// `(trial, reason)` for every excluded trial.
    pub failures: Vec<(usize, String)>,
    pub summaries: Vec<EstimatorSummary>,
}

impl ComparisonReport {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.kind == kind)
    }

    /// `mean ξ_z(kind) / mean ξ_z(CEC)`.
    pub fn pif_xi(&self, kind: EstimatorKind) -> Option<f64> {
        Some(self.summary(kind)?.mean_xi_z / self.summary(EstimatorKind::Cec)?.mean_xi_z)
    }

    /// `mean σ_x²(kind) / mean σ_x²(CEC)`.
    pub fn pif_sigma(&self, kind: EstimatorKind) -> Option<f64> {
        Some(self.summary(kind)?.mean_sigma_x2 / self.summary(EstimatorKind::Cec)?.mean_sigma_x2)
    }

    /// CNE time over CEC time.
    pub fn suf(&self) -> Option<f64> {
        Some(self.summary(EstimatorKind::Cne)?.mean_time_ms / self.summary(EstimatorKind::Cec)?.mean_time_ms)
    }
}

/// Indices of `est` over the non-pseudo measurements.
pub fn trial_indices(
    grid: &Grid,
    meas: &[Measurement],
    truth: &StateVector,
    est: &EstimationResult,
) -> Result<Indices> {
    let real: Vec<Measurement> =
        meas.iter().filter(|m| m.kind != MeasurementKind::ZeroInjectionPseudo).copied().collect();
    let z_meas: Vec<Complex64> = real.iter().map(|m| m.value).collect();
    let z_true = eval_h(grid, truth, &real)?;
    let z_est = eval_h(grid, &est.state, &real)?;
    perf_indices(&z_meas, &z_est, &z_true, &est.state.0, &truth.0)
}

fn run_trial(
    grid: &Grid,
    truth: &StateVector,
    placement: &Placement,
    cfg: &MonteCarloConfig,
    trial: usize,
) -> std::result::Result<TrialReport, String> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let noise = cfg.noise.clone().with_seed(seed);
    let set = simulate_measurements(grid, truth, placement, &noise).map_err(|e| e.to_string())?;
    let cs = placement.constraint_spec(&grid.network);
    let mut runs = Vec::with_capacity(cfg.estimators.len());
    for &kind in &cfg.estimators {
        let est = run(kind, grid, &set.measurements, &cs, &cfg.estimator).map_err(|e| format!("{kind}: {e}"))?;
        if !est.converged {
            return Err(format!("{kind}: no convergence in {} iterations", est.iterations));
        }
        let indices = trial_indices(grid, &set.measurements, truth, &est).map_err(|e| format!("{kind}: {e}"))?;
        runs.push(EstimatorTrial {
            kind,
            indices,
            iterations: est.iterations,
            time: est.timing.linear_algebra().as_secs_f64(),
            zero_injection_mismatch: est.zero_injection_mismatch,
            conjugate_defect: est.conjugate_defect,
            matrix_size: est.matrix_size,
            matrix_nnz: est.matrix_nnz,
        });
    }
    Ok(TrialReport { trial, seed, runs })
}

/// Runs all trials in parallel. A trial in which any estimator fails or
/// does not converge is dropped for every estimator and listed in
/// `failures`. Aggregation is in trial order, so results do not depend on
/// the number of worker threads.
pub fn monte_carlo(
    grid: &Grid,
    truth: &StateVector,
    placement: &Placement,
    cfg: &MonteCarloConfig,
) -> Result<ComparisonReport> {
    if cfg.trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    if cfg.estimators.is_empty() {
        return Err(Error::Config("no estimators selected".into()));
    }
    cfg.estimator.validate()?;
    cfg.noise.validate()?;
    placement.validate(&grid.network)?;

    let outcomes: Vec<_> =
        (0..cfg.trials).into_par_iter().map(|k| run_trial(grid, truth, placement, cfg, k)).collect();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (k, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(t) => trials.push(t),
            Err(reason) => {
                log::warn!("trial {k} excluded: {reason}");
                failures.push((k, reason));
            }
        }
    }

    let summaries = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(e, &kind)| {
            let runs: Vec<&EstimatorTrial> = trials.iter().map(|t| &t.runs[e]).collect();
            let count = runs.len().max(1) as f64;
            let mean = |f: &dyn Fn(&EstimatorTrial) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / count;
            EstimatorSummary {
                kind,
                mean_xi_z: mean(&|r| r.indices.xi_z),
                mean_sigma_x2: mean(&|r| r.indices.sigma_x2),
                mean_iterations: mean(&|r| r.iterations as f64),
                mean_time_ms: mean(&|r| r.time * 1e3),
                matrix_size: runs.first().map_or(0, |r| r.matrix_size),
                matrix_nnz: runs.first().map_or(0, |r| r.matrix_nnz),
                max_zero_injection_mismatch: runs.iter().map(|r| r.zero_injection_mismatch).fold(0.0, f64::max),
                max_conjugate_defect: runs.iter().fold((0.0, 0.0), |acc, r| {
                    (acc.0.max(r.conjugate_defect.0), acc.1.max(r.conjugate_defect.1))
                }),
            }
        })
        .collect();

    Ok(ComparisonReport { trials_requested: cfg.trials, trials, failures, summaries })
}
