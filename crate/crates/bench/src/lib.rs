//! Shared setup for the criterion benches.

use cse_core::harness::{simulate_measurements, solve_power_flow, NoiseSpec, Placement, PowerFlowOptions};
use cse_core::{parse_network, ConstraintSpec, Grid, Measurement};
use std::path::Path;

/// One fixture with simulated measurements, ready to estimate.
pub struct Case {
    pub grid: Grid,
    pub measurements: Vec<Measurement>,
    pub constraints: ConstraintSpec,
}

fn read(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Loads `net{nodes}.json` and the placement `{nodes}_{instance}.json`.
pub fn case(nodes: usize, instance: &str) -> Case {
    let net = parse_network(&read(&format!("net{nodes}.json"))).expect("network fixture");
    let placement = Placement::parse(&read(&format!("{nodes}_{instance}.json")), &net).expect("placement fixture");
    let grid = Grid::new(net.clone());
    let truth = solve_power_flow(&grid, &PowerFlowOptions::default()).expect("power flow").state;
    let measurements = simulate_measurements(&grid, &truth, &placement, &NoiseSpec::default().with_seed(1))
        .expect("simulation")
        .measurements;
    Case { grid, measurements, constraints: placement.constraint_spec(&net) }
}
