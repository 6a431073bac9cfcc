//! Real-variable baseline in polar coordinates.
//!
//! The state is `(V, θ)` with `u = V e^{jθ}`. Every complex measurement is
//! split into its real and imaginary parts with the weight of the complex
//! row. Voltage-magnitude meters are used in magnitude form, `h = V_i` with
//! `z = sqrt(z_sq)`, as is customary for polar estimators. Zero injections
//! give two real equality rows each and the slack contributes `θ_s = 0`;
//! the step solves `[G Cᵀ; C 0] [Δ; λ] = [Hᵀ W r; −c]`.

use super::{check_inputs, split_measurements, EstimationResult, EstimatorConfig, EstimatorKind};
use crate::measurement::{eval_measurement, injection_row, ConstraintSpec, Measurement, MeasurementKind, RowEval};
use crate::network::{Grid, StateVector};
use crate::sparse::{LuFactors, SparseMatrix, TripletBuilder};
use crate::Result;
use num_complex::Complex64;
use std::time::Instant;

type RealRow = Vec<(usize, f64)>;

/// Chain rule from Wirtinger derivatives to `(∂/∂V_j, ∂/∂θ_j)`.
fn polar_partials(row: &RowEval, u: &[Complex64]) -> Vec<(usize, Complex64, Complex64)> {
    row.entries
        .iter()
        .map(|&(j, a, b)| {
            let e = u[j] / u[j].norm();
            let d_v = a * e + b * e.conj();
            let d_theta = Complex64::i() * (a * u[j] - b * u[j].conj());
            (j, d_v, d_theta)
        })
        .collect()
}

fn split_complex(row: &RowEval, u: &[Complex64], n: usize) -> (RealRow, RealRow) {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for (j, dv, dt) in polar_partials(row, u) {
        re.push((j, dv.re));
        re.push((n + j, dt.re));
        im.push((j, dv.im));
        im.push((n + j, dt.im));
    }
    (re, im)
}

pub fn run_rec(
    grid: &Grid,
    meas: &[Measurement],
    cs: &ConstraintSpec,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    let started = Instant::now();
    check_inputs(grid, meas, cs)?;
    let n = grid.n();
    let rows = split_measurements(meas, cs, n);
    let start = cfg.start(n)?;
    let mut mag: Vec<f64> = start.0.iter().map(|u| u.norm()).collect();
    let mut ang: Vec<f64> = start.0.iter().map(|u| u.arg()).collect();
    let mut res = EstimationResult::new(EstimatorKind::Rec, start);

    for _ in 0..cfg.max_iterations {
        let u: Vec<Complex64> = mag.iter().zip(&ang).map(|(&v, &t)| Complex64::from_polar(v, t)).collect();
        let state = StateVector(u.clone());

        let t = Instant::now();
        let mut h_rows: Vec<(RealRow, f64, f64)> = Vec::with_capacity(2 * rows.len());
        for m in &rows {
            if m.kind == MeasurementKind::ScadaVoltageMagSq {
                let crate::measurement::Location::Node(i) = m.location else { unreachable!() };
                h_rows.push((vec![(i, 1.0)], m.value.re.max(0.0).sqrt() - mag[i], m.weight));
                continue;
            }
            let row = eval_measurement(grid, &state, m)?;
            let r = m.value - row.value;
            let (re, im) = split_complex(&row, &u, n);
            h_rows.push((re, r.re, m.weight));
            h_rows.push((im, r.im, m.weight));
        }
        let mut c_rows: Vec<(RealRow, f64)> = Vec::with_capacity(2 * cs.len());
        for &i in cs.zero_injection() {
            let row = injection_row(grid, &u, i);
            let (re, im) = split_complex(&row, &u, n);
            c_rows.push((re, row.value.re));
            c_rows.push((im, row.value.im));
        }
        c_rows.push((vec![(n + cs.slack(), 1.0)], ang[cs.slack()]));
        res.timing.jacobian += t.elapsed();

        let t = Instant::now();
        let dim = 2 * n + c_rows.len();
        let cap: usize = h_rows.iter().map(|(e, _, _)| e.len() * e.len()).sum::<usize>() + 4 * c_rows.len();
        let mut tb = TripletBuilder::with_capacity(dim, dim, cap);
        let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
        for (entries, r, w) in &h_rows {
            for &(p, hp) in entries {
                rhs[p] += w * hp * r;
                for &(q, hq) in entries {
                    tb.push(p, q, Complex64::new(w * hp * hq, 0.0));
                }
            }
        }
        for (k, (entries, value)) in c_rows.iter().enumerate() {
            for &(j, v) in entries {
                tb.push(2 * n + k, j, Complex64::new(v, 0.0));
                tb.push(j, 2 * n + k, Complex64::new(v, 0.0));
            }
            rhs[2 * n + k] = Complex64::new(-value, 0.0);
        }
        let kkt: SparseMatrix = tb.build();
        res.timing.assembly += t.elapsed();
        res.matrix_size = dim;
        res.matrix_nnz = kkt.upper_nnz();
        if cfg.keep_matrix {
            res.last_matrix = Some(kkt.clone());
        }

        let t = Instant::now();
        let lu = LuFactors::factor(&kkt, cfg.lu)?;
        res.timing.factor += t.elapsed();
        if lu.pivot_growth() > cfg.pivot_growth_warning {
            res.warn(format!("pivot growth {:.3e} at iteration {}", lu.pivot_growth(), res.iterations + 1));
        }
        let t = Instant::now();
        let sol = lu.solve(&rhs);
        res.timing.solve += t.elapsed();

        for j in 0..n {
            mag[j] += sol[j].re;
            ang[j] += sol[n + j].re;
        }
        let new_u: Vec<Complex64> = mag.iter().zip(&ang).map(|(&v, &t)| Complex64::from_polar(v, t)).collect();
        let step = new_u.iter().zip(&u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        res.state = StateVector(new_u);
        res.iterations += 1;
        res.step_norms.push(step);

        if !res.state.is_finite() {
            res.warn("state diverged to non-finite values".into());
            break;
        }
        if step < cfg.tolerance {
            res.converged = true;
            break;
        }
    }
    res.finish(grid, meas, cs, cfg)?;
    res.timing.total = started.elapsed();
    Ok(res)
}
