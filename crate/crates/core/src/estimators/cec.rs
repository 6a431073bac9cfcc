use super::{check_inputs, is_linear, split_measurements, step_norm, EstimationResult, EstimatorConfig, EstimatorKind};
use crate::assembly::{assemble_gain, assemble_kkt, factor_solve};
use crate::measurement::{eval_constraints, ConstraintSpec, Measurement, WirtingerSystem};
use crate::network::{Grid, StateVector};
use crate::Result;
use num_complex::Complex64;
use std::time::Instant;

/// Complex Gauss-Newton with zero injections and the slack angle enforced
/// exactly through the constrained normal equations. Constraints are
/// re-linearized at every iterate.
pub fn run_cec(
    grid: &Grid,
    meas: &[Measurement],
    cs: &ConstraintSpec,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    let started = Instant::now();
    check_inputs(grid, meas, cs)?;
    let rows = split_measurements(meas, cs, grid.n());
    let mut res = EstimationResult::new(EstimatorKind::Cec, cfg.start(grid.n())?);
    res.linear_model = is_linear(&rows, cs);

    for _ in 0..cfg.max_iterations {
        let t = Instant::now();
        let sys = WirtingerSystem::build(grid, &res.state, &rows, Some(cs))?;
        res.timing.jacobian += t.elapsed();

        let t = Instant::now();
        let gain = assemble_gain(&sys.weights, &sys.r, &sys.hx, &sys.hxbar)?;
        let kkt = assemble_kkt(&gain, &sys.constraints)?;
        res.timing.assembly += t.elapsed();
        res.matrix_size = kkt.dim();
        res.matrix_nnz = kkt.upper_nnz();
        if cfg.keep_matrix {
            res.last_matrix = Some(kkt.matrix.clone());
        }

        let sol = factor_solve(&kkt, cfg.lu)?;
        res.timing.factor += sol.factor_time;
        res.timing.solve += sol.solve_time;
        if sol.pivot_growth > cfg.pivot_growth_warning {
            res.warn(format!("pivot growth {:.3e} at iteration {}", sol.pivot_growth, res.iterations + 1));
        }
        let (dd, dm) = sol.conjugate_pair_defect();
        res.conjugate_defect.0 = res.conjugate_defect.0.max(dd);
        res.conjugate_defect.1 = res.conjugate_defect.1.max(dm);

        let dx = if cfg.damping { damped(grid, &rows, cs, &res.state, &sol.dx, cfg)? } else { sol.dx };
        let step = step_norm(&dx);
        for (u, d) in res.state.0.iter_mut().zip(&dx) {
            *u += d;
        }
        res.iterations += 1;
        res.step_norms.push(step);
        res.multipliers = sol.lambda;
        res.conjugate_multipliers = sol.mu;

        if !res.state.is_finite() {
            res.warn("state diverged to non-finite values".into());
            break;
        }
        if res.linear_model || step < cfg.tolerance {
            res.converged = true;
            break;
        }
    }
    res.finish(grid, meas, cs, cfg)?;
    res.timing.total = started.elapsed();
    Ok(res)
}

/// Weighted residual plus a quadratic penalty on the constraint mismatch.
pub(super) fn merit(
    grid: &Grid,
    rows: &[Measurement],
    cs: &ConstraintSpec,
    state: &StateVector,
    penalty: f64,
) -> Result<f64> {
    let obj = super::objective(grid, state, rows)?;
    let cons = eval_constraints(grid, state, cs)?;
    Ok(obj + penalty * cons.s.iter().map(|v| v.norm_sqr()).sum::<f64>())
}

pub(super) fn damped(
    grid: &Grid,
    rows: &[Measurement],
    cs: &ConstraintSpec,
    state: &StateVector,
    dx: &[Complex64],
    cfg: &EstimatorConfig,
) -> Result<Vec<Complex64>> {
    // near the solution a constrained step can raise the penalty merit
    // slightly; increases below one part in a million are accepted
    let base = merit(grid, rows, cs, state, cfg.cne_pseudo_weight)?;
    let accept = base * (1.0 + 1e-6) + 1e-12;
    let mut alpha = 1.0;
    for _ in 0..8 {
        let trial = StateVector(state.0.iter().zip(dx).map(|(u, d)| u + d * alpha).collect());
        if merit(grid, rows, cs, &trial, cfg.cne_pseudo_weight)? <= accept {
            break;
        }
        alpha *= 0.5;
    }
    Ok(dx.iter().map(|d| d * alpha).collect())
}
