//! Newton power flow in complex variables, used to produce true states.
//!
//! Every non-slack node must satisfy `s_i(u) = S_i` with `S_i` the
//! scheduled net injection; the slack is held at `1 + j0`. The Newton
//! system carries each equation together with its conjugate.

use crate::measurement::injection_row;
use crate::network::{Grid, StateVector};
use crate::sparse::{LuFactors, LuOptions, TripletBuilder};
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct PowerFlowOptions {
    /// Largest allowed `|s_i − S_i|` at the solution.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Solutions with any `|u_i|` below this are rejected as the
    /// low-voltage branch.
    pub min_voltage: f64,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions { tolerance: 1e-10, max_iterations: 30, min_voltage: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct PowerFlowSolution {
    pub state: StateVector,
    pub iterations: usize,
    pub mismatch: f64,
}

/// Solves with the network's scheduled injections from a flat start.
///
/// A node with a voltage setpoint replaces its equation by
/// `(Re s_i − P_i) + j(|u_i|² − V_i²) = 0`; its reactive generation is
/// whatever the solution needs.
pub fn solve_power_flow(grid: &Grid, opts: &PowerFlowOptions) -> Result<PowerFlowSolution> {
    let n = grid.n();
    let slack = grid.network.slack();
    let target = grid.network.scheduled_injections();
    let setpoint: Vec<Option<f64>> = grid.network.nodes().iter().map(|node| node.voltage_setpoint).collect();
    let one = Complex64::new(1.0, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let j = Complex64::new(0.0, 1.0);
    let mut u: Vec<Complex64> = setpoint.iter().map(|v| Complex64::new(v.unwrap_or(1.0), 0.0)).collect();
    u[slack] = one;

    for it in 0..=opts.max_iterations {
        let mut t = TripletBuilder::with_capacity(2 * n, 2 * n, 8 * grid.admittance.structural_nnz());
        let mut f = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            if i == slack {
                f[i] = u[i] - one;
                t.push(i, i, one);
                t.push(n + i, n + i, one);
                continue;
            }
            let row = injection_row(grid, &u, i);
            let mut entries = row.entries;
            match setpoint[i] {
                None => f[i] = row.value - target[i],
                Some(v) => {
                    f[i] = Complex64::new(row.value.re - target[i].re, u[i].norm_sqr() - v * v);
                    for (_, a, b) in entries.iter_mut() {
                        let (da, db) = (half * (*a + b.conj()), half * (*b + a.conj()));
                        *a = da;
                        *b = db;
                    }
                    entries.push((i, j * u[i].conj(), j * u[i]));
                }
            }
            for (k, a, b) in entries {
                t.push(i, k, a);
                t.push(i, n + k, b);
                t.push(n + i, k, b.conj());
                t.push(n + i, n + k, a.conj());
            }
        }
        let mismatch = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        log::trace!("power flow iteration {it}: mismatch {mismatch:e}");
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < opts.tolerance {
            let state = StateVector(u);
            if state.min_magnitude().1 < opts.min_voltage {
                return Err(Error::PowerFlowDiverged { iterations: it });
            }
            return Ok(PowerFlowSolution { state, iterations: it, mismatch });
        }
        if it == opts.max_iterations {
            break;
        }
        let jac = t.build();
        let lu = LuFactors::factor(&jac, LuOptions::default()).map_err(|_| Error::PowerFlowDiverged { iterations: it })?;
        let mut rhs: Vec<Complex64> = f.iter().map(|v| -v).collect();
        rhs.extend(f.iter().map(|v| -v.conj()));
        let dx = lu.solve(&rhs);
        for (ui, d) in u.iter_mut().zip(&dx[..n]) {
            *ui += d;
        }
    }
    Err(Error::PowerFlowDiverged { iterations: opts.max_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    #[test]
    fn two_node_radial_case() {
        let text = r#"{"slack": "a", "nodes": [{"id": "a"}, {"id": "b", "p_load": 0.5, "q_load": 0.2}],
            "branches": [{"from": "a", "to": "b", "g": 2.0, "b": -10.0}]}"#;
        let grid = Grid::new(parse_network(text).unwrap());
        let sol = solve_power_flow(&grid, &PowerFlowOptions::default()).unwrap();
        let u = &sol.state.0;
        assert_eq!(u[0], Complex64::new(1.0, 0.0));
        // load drawn at b equals the scheduled value
        let y = Complex64::new(2.0, -10.0);
        let i_ab = y * (u[0] - u[1]);
        let s_b = u[1] * i_ab.conj();
        assert!((s_b - Complex64::new(0.5, 0.2)).norm() < 1e-10);
        assert!(u[1].norm() < 1.0);
        assert!(sol.iterations <= 6);
    }

    #[test]
    fn infeasible_load_is_reported() {
        let text = r#"{"slack": "a", "nodes": [{"id": "a"}, {"id": "b", "p_load": 50.0, "q_load": 20.0}],
            "branches": [{"from": "a", "to": "b", "g": 2.0, "b": -10.0}]}"#;
        let grid = Grid::new(parse_network(text).unwrap());
        assert!(matches!(
            solve_power_flow(&grid, &PowerFlowOptions::default()),
            Err(Error::PowerFlowDiverged { .. })
        ));
    }

    #[test]
    fn voltage_controlled_node_holds_its_setpoint() {
        let text = r#"{"slack": "a", "nodes": [{"id": "a"}, {"id": "b", "p_load": 0.3, "q_load": 0.1},
            {"id": "c", "p_gen": 0.2, "v_set": 1.02}],
            "branches": [{"from": "a", "to": "b", "g": 2.0, "b": -10.0}, {"from": "b", "to": "c", "g": 1.0, "b": -8.0}]}"#;
        let grid = Grid::new(parse_network(text).unwrap());
        let sol = solve_power_flow(&grid, &PowerFlowOptions::default()).unwrap();
        let u = &sol.state.0;
        assert!((u[2].norm() - 1.02).abs() < 1e-10);
        let s_c = injection_row(&grid, u, 2).value;
        assert!((s_c.re - 0.2).abs() < 1e-10);
        let s_b = injection_row(&grid, u, 1).value;
        assert!((s_b - Complex64::new(-0.3, -0.1)).norm() < 1e-10);
    }
}
