//! Iterative estimators sharing one convergence rule: stop when the largest
//! complex voltage change of an iteration drops below the tolerance.

mod cec;
mod cne;
mod rec;

pub use cec::run_cec;
pub use cne::run_cne;
pub use rec::run_rec;

use crate::measurement::{eval_h, ConstraintSpec, Measurement, MeasurementKind};
use crate::network::{Grid, Network, StateVector};
use crate::sparse::{LuOptions, SparseMatrix};
use crate::{Error, Result};
use num_complex::Complex64;
use serde_json::{json, Value};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Cne,
    Cec,
    Rec,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Cne, EstimatorKind::Cec, EstimatorKind::Rec];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Cne => "cne",
            EstimatorKind::Cec => "cec",
            EstimatorKind::Rec => "rec",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cne" => Ok(EstimatorKind::Cne),
            "cec" => Ok(EstimatorKind::Cec),
            "rec" => Ok(EstimatorKind::Rec),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    /// Convergence threshold on `max |Δx_i|`, per-unit.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from `1 + j0` everywhere; otherwise `initial_state` is used.
    pub flat_start: bool,
    pub initial_state: Option<StateVector>,
    /// Weight of zero-injection pseudo-measurements in CNE.
    pub cne_pseudo_weight: f64,
    /// Weight of the slack-angle pseudo-measurement in CNE; defaults to
    /// `cne_pseudo_weight`.
    pub cne_slack_weight: Option<f64>,
    /// Halve the step while the merit function increases (up to 8 times).
    pub damping: bool,
    /// Warn when the factorization's pivot growth exceeds this.
    pub pivot_growth_warning: f64,
    /// Sanity bound on converged voltage magnitudes.
    pub voltage_bound: f64,
    pub lu: LuOptions,
    /// Keep the coefficient matrix of the last solve in the result.
    pub keep_matrix: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            tolerance: 1e-6,
            max_iterations: 25,
            flat_start: true,
            initial_state: None,
            cne_pseudo_weight: 25.0,
            cne_slack_weight: None,
            damping: false,
            pivot_growth_warning: 1e6,
            voltage_bound: 2.0,
            lu: LuOptions::default(),
            keep_matrix: false,
        }
    }
}

impl EstimatorConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.cne_pseudo_weight > 0.0) || self.cne_slack_weight.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::Config("pseudo-measurement weights must be positive".into()));
        }
        if !self.flat_start && self.initial_state.is_none() {
            return Err(Error::Config("flat_start is off but no initial state was given".into()));
        }
        Ok(())
    }

    pub(crate) fn start(&self, n: usize) -> Result<StateVector> {
        self.validate()?;
        match (&self.initial_state, self.flat_start) {
            (Some(s), false) if s.len() == n => Ok(s.clone()),
            (Some(s), false) => Err(Error::Dimension(format!("initial state has {} entries, expected {n}", s.len()))),
            _ => Ok(StateVector::flat(n)),
        }
    }
}

/// Wall-clock time per phase, summed over iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub jacobian: Duration,
    pub assembly: Duration,
    pub factor: Duration,
    pub solve: Duration,
    pub total: Duration,
}

impl Timing {
    /// Assembly, factorization and solve.
    pub fn linear_algebra(&self) -> Duration {
        self.assembly + self.factor + self.solve
    }
}

#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub estimator: EstimatorKind,
    pub state: StateVector,
    pub iterations: usize,
    pub converged: bool,
    /// The model was linear (PMU phasors with the slack condition only), so
    /// the first step is exact and the loop stops after one solve.
    pub linear_model: bool,
    pub step_norms: Vec<f64>,
    /// Constraint multipliers of the last solve, zero injections first and
    /// the slack last (CEC only).
    pub multipliers: Vec<Complex64>,
    /// Multipliers of the conjugate constraint rows (CEC only).
    pub conjugate_multipliers: Vec<Complex64>,
    /// `Σ w |z − h(x)|²` over the supplied measurements at the final state.
    pub objective: f64,
    /// Largest `|s_i|` over the constrained zero-injection nodes at the
    /// final state.
    pub zero_injection_mismatch: f64,
    /// Largest `max|Δy − conj(Δx)|` and `max|μ − conj(λ)|` over all solves
    /// (complex estimators only).
    pub conjugate_defect: (f64, f64),
    pub matrix_size: usize,
    pub matrix_nnz: usize,
    pub timing: Timing,
    pub diagnostics: Vec<String>,
    /// Coefficient matrix of the last solve, when requested.
    pub last_matrix: Option<SparseMatrix>,
}

impl EstimationResult {
    pub(crate) fn new(estimator: EstimatorKind, state: StateVector) -> Self {
        EstimationResult {
            estimator,
            state,
            iterations: 0,
            converged: false,
            linear_model: false,
            step_norms: Vec::new(),
            multipliers: Vec::new(),
            conjugate_multipliers: Vec::new(),
            objective: 0.0,
            zero_injection_mismatch: 0.0,
            conjugate_defect: (0.0, 0.0),
            matrix_size: 0,
            matrix_nnz: 0,
            timing: Timing::default(),
            diagnostics: Vec::new(),
            last_matrix: None,
        }
    }

    pub(crate) fn warn(&mut self, msg: String) {
        log::warn!("{}: {msg}", self.estimator);
        self.diagnostics.push(msg);
    }

    pub(crate) fn finish(
        &mut self,
        grid: &Grid,
        meas: &[Measurement],
        cs: &ConstraintSpec,
        cfg: &EstimatorConfig,
    ) -> Result<()> {
        self.objective = objective(grid, &self.state, meas)?;
        self.zero_injection_mismatch = zero_injection_mismatch(grid, &self.state, cs.zero_injection());
        if self.converged && !self.state.within_bounds(cfg.voltage_bound) {
            let (i, v) = self.state.min_magnitude();
            self.warn(format!(
                "converged state leaves the magnitude bound {} (smallest |u| = {v:.4} at `{}`)",
                cfg.voltage_bound,
                grid.network.id_of(i)
            ));
        }
        if !self.converged {
            self.warn(format!("no convergence after {} iterations", self.iterations));
        }
        Ok(())
    }

    /// JSON with node ids, the iteration trace, multipliers, timing in
    /// milliseconds and matrix statistics.
    pub fn to_json(&self, net: &Network) -> Value {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let state: Vec<Value> = self
            .state
            .0
            .iter()
            .enumerate()
            .map(|(i, u)| json!({"node": net.id_of(i), "re": u.re, "im": u.im}))
            .collect();
        let mults = |v: &[Complex64]| v.iter().map(|z| json!({"re": z.re, "im": z.im})).collect::<Vec<_>>();
        json!({
            "estimator": self.estimator.name(),
            "converged": self.converged,
            "linear_model": self.linear_model,
            "iterations": self.iterations,
            "step_norms": self.step_norms,
            "objective": self.objective,
            "zero_injection_mismatch": self.zero_injection_mismatch,
            "state": state,
            "multipliers": mults(&self.multipliers),
            "conjugate_multipliers": mults(&self.conjugate_multipliers),
            "matrix_size": self.matrix_size,
            "matrix_nnz": self.matrix_nnz,
            "timing_ms": {
                "jacobian": ms(self.timing.jacobian),
                "assembly": ms(self.timing.assembly),
                "factor": ms(self.timing.factor),
                "solve": ms(self.timing.solve),
                "total": ms(self.timing.total),
            },
            "diagnostics": self.diagnostics,
        })
    }
}

/// `max_i |Δx_i| < ε`.
pub fn check_convergence(step: &[Complex64], tolerance: f64) -> bool {
    step_norm(step) < tolerance
}

pub fn step_norm(step: &[Complex64]) -> f64 {
    step.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Σ w |z − h(x)|²`.
pub fn objective(grid: &Grid, state: &StateVector, meas: &[Measurement]) -> Result<f64> {
    let h = eval_h(grid, state, meas)?;
    Ok(meas.iter().zip(&h).map(|(m, h)| m.weight * (m.value - h).norm_sqr()).sum())
}

pub fn zero_injection_mismatch(grid: &Grid, state: &StateVector, nodes: &[usize]) -> f64 {
    nodes
        .iter()
        .map(|&i| crate::measurement::injection_row(grid, &state.0, i).value.norm())
        .fold(0.0, f64::max)
}

/// Measurement rows actually used next to the constraint set: pseudo
/// zero-injection rows at constrained nodes are dropped.
pub(crate) fn split_measurements(meas: &[Measurement], cs: &ConstraintSpec, n: usize) -> Vec<Measurement> {
    let mut constrained = vec![false; n];
    for &i in cs.zero_injection() {
        constrained[i] = true;
    }
    meas.iter()
        .filter(|m| match (m.kind, m.location) {
            (MeasurementKind::ZeroInjectionPseudo, crate::measurement::Location::Node(i)) => !constrained[i],
            _ => true,
        })
        .copied()
        .collect()
}

pub(crate) fn is_linear(meas: &[Measurement], cs: &ConstraintSpec) -> bool {
    cs.zero_injection().is_empty() && meas.iter().all(|m| m.kind.is_linear())
}

pub(crate) fn check_inputs(grid: &Grid, meas: &[Measurement], cs: &ConstraintSpec) -> Result<()> {
    for m in meas {
        m.validate(&grid.network)?;
    }
    let n = grid.n();
    if cs.slack() >= n || cs.zero_injection().iter().any(|&i| i >= n) {
        return Err(Error::InvalidConstraint("constraint refers to a node outside the network".into()));
    }
    Ok(())
}

/// Runs the selected estimator.
pub fn run(
    kind: EstimatorKind,
    grid: &Grid,
    meas: &[Measurement],
    cs: &ConstraintSpec,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    match kind {
        EstimatorKind::Cne => run_cne(grid, meas, cs, cfg),
        EstimatorKind::Cec => run_cec(grid, meas, cs, cfg),
        EstimatorKind::Rec => run_rec(grid, meas, cs, cfg),
    }
}
