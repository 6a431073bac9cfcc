use super::cec::damped;
use super::{check_inputs, is_linear, split_measurements, step_norm, EstimationResult, EstimatorConfig, EstimatorKind};
use crate::assembly::{assemble_gain, assemble_kkt, factor_solve};
use crate::measurement::{ConstraintSpec, ConstraintSystem, Measurement, WirtingerSystem};
use crate::network::Grid;
use crate::Result;
use std::time::Instant;

/// Complex Gauss-Newton on the plain normal equations. Zero injections and
/// the slack angle enter as heavily weighted pseudo-measurements with value
/// zero, so their mismatch at the solution is small but not exact.
pub fn run_cne(
    grid: &Grid,
    meas: &[Measurement],
    cs: &ConstraintSpec,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    let started = Instant::now();
    check_inputs(grid, meas, cs)?;
    let n = grid.n();
    let rows = split_measurements(meas, cs, n);
    let mut res = EstimationResult::new(EstimatorKind::Cne, cfg.start(n)?);
    res.linear_model = is_linear(&rows, cs);

    let mut pseudo_weights = vec![cfg.cne_pseudo_weight; cs.zero_injection().len()];
    pseudo_weights.push(cfg.cne_slack_weight.unwrap_or(cfg.cne_pseudo_weight));
    let mut weights: Vec<f64> = rows.iter().map(|m| m.weight).collect();
    weights.extend_from_slice(&pseudo_weights);
    let none = ConstraintSystem::empty(n);

    for _ in 0..cfg.max_iterations {
        let t = Instant::now();
        let sys = WirtingerSystem::build(grid, &res.state, &rows, Some(cs))?;
        let hx = sys.hx.vstack(&sys.constraints.jx);
        let hxbar = sys.hxbar.vstack(&sys.constraints.jxbar);
        let mut r = sys.r;
        r.extend(sys.constraints.s.iter().map(|s| -s));
        res.timing.jacobian += t.elapsed();

        let t = Instant::now();
        let gain = assemble_gain(&weights, &r, &hx, &hxbar)?;
        let kkt = assemble_kkt(&gain, &none)?;
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
            res.warn(format!(
                "ill-conditioned normal equations: pivot growth {:.3e} at iteration {}",
                sol.pivot_growth,
                res.iterations + 1
            ));
        }
        let (dd, _) = sol.conjugate_pair_defect();
        res.conjugate_defect.0 = res.conjugate_defect.0.max(dd);

        let dx = if cfg.damping { damped(grid, &rows, cs, &res.state, &sol.dx, cfg)? } else { sol.dx };
        let step = step_norm(&dx);
        for (u, d) in res.state.0.iter_mut().zip(&dx) {
            *u += d;
        }
        res.iterations += 1;
        res.step_norms.push(step);

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
