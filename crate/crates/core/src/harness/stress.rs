//! Load-scaling sweeps toward the power-flow feasibility edge.

use super::placement::Placement;
use super::powerflow::{solve_power_flow, PowerFlowOptions};
use super::simulate::{simulate_measurements, NoiseSpec};
use crate::estimators::{run, EstimatorConfig, EstimatorKind};
use crate::network::{Grid, Network};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct StressConfig {
    pub multipliers: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub estimator: EstimatorConfig,
    pub noise: NoiseSpec,
    pub power_flow: PowerFlowOptions,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            multipliers: vec![1.0],
            estimators: vec![EstimatorKind::Cec, EstimatorKind::Rec],
            estimator: EstimatorConfig::default().with_tolerance(1e-7),
            noise: NoiseSpec::default(),
            power_flow: PowerFlowOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StressRun {
    pub kind: EstimatorKind,
    pub iterations: usize,
    pub converged: bool,
    pub step_norms: Vec<f64>,
    /// Error text when the estimator itself failed.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct StressRow {
    pub multiplier: f64,
    /// `false` when the power flow has no acceptable solution.
    pub feasible: bool,
    pub min_voltage_node: String,
    pub min_voltage: f64,
    pub runs: Vec<StressRun>,
}

impl StressRow {
    pub fn run(&self, kind: EstimatorKind) -> Option<&StressRun> {
        self.runs.iter().find(|r| r.kind == kind)
    }
}

/// Scales every load by each multiplier (generation fixed, the slack takes
/// up the difference), re-solves the power flow, draws measurements with
/// the fixed noise seed and runs the estimators.
pub fn stress_sweep(net: &Network, placement: &Placement, cfg: &StressConfig) -> Result<Vec<StressRow>> {
    if cfg.multipliers.iter().any(|m| !(*m >= 1.0) || !m.is_finite()) {
        return Err(Error::Config("load multipliers must be finite and at least 1".into()));
    }
    placement.validate(net)?;
    let mut rows = Vec::with_capacity(cfg.multipliers.len());
    for &mult in &cfg.multipliers {
        let grid = Grid::new(net.with_load_multiplier(mult));
        let truth = match solve_power_flow(&grid, &cfg.power_flow) {
            Ok(pf) => pf.state,
            Err(Error::PowerFlowDiverged { .. }) => {
                rows.push(StressRow {
                    multiplier: mult,
                    feasible: false,
                    min_voltage_node: String::new(),
                    min_voltage: f64::NAN,
                    runs: Vec::new(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let (imin, vmin) = truth.min_magnitude();
        let set = simulate_measurements(&grid, &truth, placement, &cfg.noise)?;
        let cs = placement.constraint_spec(&grid.network);
        let runs = cfg
            .estimators
            .iter()
            .map(|&kind| match run(kind, &grid, &set.measurements, &cs, &cfg.estimator) {
                Ok(r) => StressRun {
                    kind,
                    iterations: r.iterations,
                    converged: r.converged,
                    step_norms: r.step_norms,
                    error: None,
                },
                Err(e) => StressRun { kind, iterations: 0, converged: false, step_norms: Vec::new(), error: Some(e.to_string()) },
            })
            .collect();
        rows.push(StressRow {
            multiplier: mult,
            feasible: true,
            min_voltage_node: grid.network.id_of(imin).to_string(),
            min_voltage: vmin,
            runs,
        });
    }
    Ok(rows)
}

/// Largest load multiplier in `[lo, hi]` at which the power flow still
/// solves, to within `tol`. `lo` must be feasible.
pub fn feasibility_edge(net: &Network, lo: f64, hi: f64, tol: f64, opts: &PowerFlowOptions) -> Result<f64> {
    let feasible = |m: f64| solve_power_flow(&Grid::new(net.with_load_multiplier(m)), opts).is_ok();
    if !feasible(lo) {
        return Err(Error::Config(format!("load multiplier {lo} is already infeasible")));
    }
    if feasible(hi) {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if feasible(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a)
}
