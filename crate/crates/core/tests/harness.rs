use cse_core::harness::*;
use cse_core::*;
use std::path::Path;

fn read(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn desk(instance: &str) -> (Network, Grid, StateVector, Placement) {
    let net = parse_network(&read("net118.json")).unwrap();
    let placement = Placement::parse(&read(&format!("118_{instance}.json")), &net).unwrap();
    let grid = Grid::new(net.clone());
    let truth = solve_power_flow(&grid, &PowerFlowOptions::default()).unwrap().state;
    (net, grid, truth, placement)
}

fn small_config(trials: usize) -> MonteCarloConfig {
    MonteCarloConfig { trials, seed: 11, ..MonteCarloConfig::default() }
}

#[test]
fn monte_carlo_is_deterministic_and_thread_count_independent() {
    let (_, grid, truth, placement) = desk("B");
    let cfg = small_config(6);
    let a = monte_carlo(&grid, &truth, &placement, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| monte_carlo(&grid, &truth, &placement, &cfg).unwrap());
    assert_eq!(a.trials.len(), 6);
    for (x, y) in a.summaries.iter().zip(&b.summaries) {
        assert_eq!(x.mean_xi_z, y.mean_xi_z);
        assert_eq!(x.mean_sigma_x2, y.mean_sigma_x2);
        assert_eq!(x.mean_iterations, y.mean_iterations);
    }
    assert_eq!(a.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), (11..17).collect::<Vec<_>>());
}

#[test]
fn monte_carlo_trials_use_identical_measurements_per_estimator() {
    let (_, grid, truth, placement) = desk("D");
    let rep = monte_carlo(&grid, &truth, &placement, &small_config(1)).unwrap();
    let trial = &rep.trials[0];
    let meas = simulate_measurements(&grid, &truth, &placement, &NoiseSpec::default().with_seed(trial.seed))
        .unwrap()
        .measurements;
    let cs = placement.constraint_spec(&grid.network);
    for run_record in &trial.runs {
        let direct = run(run_record.kind, &grid, &meas, &cs, &EstimatorConfig::default()).unwrap();
        let idx = monte_carlo::trial_indices(&grid, &meas, &truth, &direct).unwrap();
        assert_eq!(idx.xi_z, run_record.indices.xi_z, "{}", run_record.kind);
        assert_eq!(direct.iterations, run_record.iterations);
    }
    assert!(rep.pif_xi(EstimatorKind::Cne).unwrap().is_finite());
    assert!(rep.suf().unwrap() > 0.0);
}

#[test]
fn noise_free_trials_are_excluded_with_a_reason() {
    let (_, grid, truth, placement) = desk("D");
    let cfg = MonteCarloConfig { trials: 2, noise: NoiseSpec::noiseless(), ..MonteCarloConfig::default() };
    let rep = monte_carlo(&grid, &truth, &placement, &cfg).unwrap();
    assert_eq!(rep.trials.len() + rep.failures.len(), 2);
    assert_eq!(rep.failures.len(), 2);
    assert!(rep.failures.iter().all(|(_, why)| !why.is_empty()));
}

#[test]
fn monte_carlo_rejects_bad_configuration() {
    let (_, grid, truth, placement) = desk("A");
    assert!(monte_carlo(&grid, &truth, &placement, &small_config(0)).is_err());
    let none = MonteCarloConfig { estimators: vec![], ..small_config(1) };
    assert!(monte_carlo(&grid, &truth, &placement, &none).is_err());
}

#[test]
fn unit_multiplier_matches_the_unstressed_run() {
    let (net, grid, truth, placement) = desk("A");
    let cfg = StressConfig { multipliers: vec![1.0], ..StressConfig::default() };
    let rows = stress_sweep(&net, &placement, &cfg).unwrap();
    let meas = simulate_measurements(&grid, &truth, &placement, &cfg.noise).unwrap().measurements;
    let cs = placement.constraint_spec(&net);
    for kind in [EstimatorKind::Cec, EstimatorKind::Rec] {
        let direct = run(kind, &grid, &meas, &cs, &cfg.estimator).unwrap();
        let swept = rows[0].run(kind).unwrap();
        assert_eq!(swept.iterations, direct.iterations, "{kind}");
        assert_eq!(swept.step_norms, direct.step_norms, "{kind}");
    }
}

#[test]
fn heavier_load_never_raises_the_minimum_voltage() {
    let (net, _, _, placement) = desk("C");
    let multipliers = vec![1.0, 1.1, 1.2, 1.3, 1.4];
    let rows = stress_sweep(&net, &placement, &StressConfig { multipliers, ..StressConfig::default() }).unwrap();
    let feasible: Vec<&StressRow> = rows.iter().filter(|r| r.feasible).collect();
    assert!(feasible.len() >= 2);
    for w in feasible.windows(2) {
        // power-flow oracle: each row's minimum is the true state's minimum
        assert!(w[1].min_voltage <= w[0].min_voltage + 1e-12);
    }
}

#[test]
fn infeasible_multiplier_marks_the_row() {
    let (net, _, _, placement) = desk("A");
    let rows = stress_sweep(&net, &placement, &StressConfig { multipliers: vec![1.0, 50.0], ..StressConfig::default() })
        .unwrap();
    assert!(rows[0].feasible);
    assert!(!rows[1].feasible && rows[1].runs.is_empty());
    assert!(stress_sweep(&net, &placement, &StressConfig { multipliers: vec![0.9], ..StressConfig::default() }).is_err());
}

#[test]
fn feasibility_edge_brackets_the_collapse_point() {
    let (net, _, _, _) = desk("A");
    let opts = PowerFlowOptions::default();
    let edge = feasibility_edge(&net, 1.0, 10.0, 1e-3, &opts).unwrap();
    assert!(edge > 1.0 && edge < 10.0);
    let solves = |m: f64| solve_power_flow(&Grid::new(net.with_load_multiplier(m)), &opts).is_ok();
    assert!(solves(edge));
    assert!(!solves(edge + 2e-3));
}

#[test]
fn load_multiplier_scales_loads_only() {
    let (net, _, _, _) = desk("A");
    let heavy = net.with_load_multiplier(1.5);
    for (a, b) in net.nodes().iter().zip(heavy.nodes()) {
        assert!((b.load - a.load * 1.5).norm() < 1e-15);
        assert_eq!(a.generation.re, b.generation.re);
        assert_eq!(a.voltage_setpoint, b.voltage_setpoint);
    }
}
