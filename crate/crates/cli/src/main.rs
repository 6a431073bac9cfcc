use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cse_core::harness::{
    feasibility_edge, monte_carlo, simulate_measurements, solve_power_flow, stress_sweep, ComparisonReport, FixtureSet,
    MonteCarloConfig, NoiseSpec, Placement, PowerFlowOptions, StressConfig, StressRow,
};
use cse_core::kernels::Backend;
use cse_core::{
    parse_network, run, ConstraintSpec, EstimatorConfig, EstimatorKind, Grid, MeasurementSet, Network, StateVector,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// Hybrid SCADA/PMU state estimation in complex variables.
#[derive(Parser)]
#[command(name = "cse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator and print the result as JSON.
    Estimate(EstimateArgs),
    /// Solve the power flow and write noisy measurements as JSON lines.
    Simulate(SimulateArgs),
    /// Monte-Carlo comparison of the estimators, as CSV.
    Bench(BenchArgs),
    /// Load-scaling sweep, as CSV, with a per-iteration trace.
    Stress(StressArgs),
    /// Scalar vs vectorized kernel throughput.
    KernelBench(KernelBenchArgs),
    /// Write the synthetic test networks and meter placements.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Network file (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Meter placement file (JSON).
    #[arg(long)]
    placement: Option<PathBuf>,
    /// Noise seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Uniform load multiplier applied before solving the power flow.
    #[arg(long = "load-mult", default_value_t = 1.0)]
    load_mult: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement file (JSON lines). Simulated from the placement when omitted.
    #[arg(long)]
    measurements: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Estimator::Cec)]
    estimator: Estimator,
    /// Convergence threshold on the largest voltage change, per-unit.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long = "max-iterations", default_value_t = 25)]
    max_iterations: usize,
    /// Write the coefficient matrix of the last solve as `row col re im` lines.
    #[arg(long = "dump-kkt")]
    dump_kkt: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Instance label for the first CSV column; the placement file stem by default.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct StressArgs {
    /// Network file (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Meter placement file (JSON).
    #[arg(long)]
    placement: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Load multipliers, comma separated. When omitted the feasibility edge
    /// is located and the sweep spans 1 to the edge.
    #[arg(long = "load-mult", value_delimiter = ',')]
    load_mult: Vec<f64>,
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Estimators to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Estimator::Cec, Estimator::Rec])]
    estimator: Vec<Estimator>,
    /// Output CSV; the trace goes to `<stem>_trace.csv` beside it. Without
    /// it the table goes to stdout and the trace is not written.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelBenchArgs {
    /// Elements per slice.
    #[arg(long, default_value_t = 4096)]
    len: usize,
    /// Timed passes per kernel; the best is reported.
    #[arg(long, default_value_t = 200)]
    passes: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Size::Desk)]
    size: Size,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Cne,
    Cec,
    Rec,
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Cne => EstimatorKind::Cne,
            Estimator::Cec => EstimatorKind::Cec,
            Estimator::Rec => EstimatorKind::Rec,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Size {
    /// 118 nodes.
    Desk,
    /// 1888 nodes.
    Large,
    Both,
}

/// Errors that map to the input-error exit code.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| InputError(e).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NON_CONVERGENCE),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<InputError>() {
                ExitCode::from(EXIT_INPUT)
            } else if let Some(cse_core::Error::PowerFlowDiverged { .. }) = e.downcast_ref::<cse_core::Error>() {
                ExitCode::from(EXIT_NON_CONVERGENCE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

/// `Ok(false)` signals non-convergence.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Stress(a) => stress(a),
        Command::KernelBench(a) => {
            kernel_bench(a);
            Ok(true)
        }
        Command::Synth(a) => synth(a).map(|_| true),
    }
}

fn read(path: &Path) -> Result<String> {
    input(fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))
}

fn load_network(path: &Path, load_mult: f64) -> Result<Network> {
    if !(load_mult > 0.0) {
        return input(Err(anyhow::anyhow!("--load-mult must be positive, got {load_mult}")));
    }
    let net = input(parse_network(&read(path)?).with_context(|| format!("parsing {}", path.display())))?;
    Ok(if load_mult == 1.0 { net } else { net.with_load_multiplier(load_mult) })
}

fn load_placement(path: &Path, net: &Network) -> Result<Placement> {
    input(Placement::parse(&read(path)?, net).with_context(|| format!("parsing {}", path.display())))
}

fn require_placement(c: &Common, net: &Network) -> Result<Placement> {
    match &c.placement {
        Some(p) => load_placement(p, net),
        None => input(Err(anyhow::anyhow!("--placement is required"))),
    }
}

fn true_state(grid: &Grid) -> Result<StateVector> {
    Ok(solve_power_flow(grid, &PowerFlowOptions::default())?.state)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimator_config(tolerance: f64, max_iterations: usize) -> Result<EstimatorConfig> {
    let cfg = EstimatorConfig { max_iterations, ..EstimatorConfig::default().with_tolerance(tolerance) };
    input(cfg.validate().map_err(Into::into))?;
    Ok(cfg)
}

fn estimate(a: EstimateArgs) -> Result<bool> {
    let c = &a.common;
    let net = load_network(&c.network, c.load_mult)?;
    let grid = Grid::new(net.clone());
    let placement = c.placement.as_deref().map(|p| load_placement(p, &net)).transpose()?;
    let meas = match (&a.measurements, &placement) {
        (Some(path), _) => input(MeasurementSet::from_jsonl(&read(path)?, &net).with_context(|| format!("parsing {}", path.display())))?,
        (None, Some(p)) => {
            let truth = true_state(&grid)?;
            input(simulate_measurements(&grid, &truth, p, &NoiseSpec::default().with_seed(c.seed)).map_err(Into::into))?
        }
        (None, None) => return input(Err(anyhow::anyhow!("either --measurements or --placement is required"))),
    };
    let cs = match &placement {
        Some(p) => p.constraint_spec(&net),
        None => ConstraintSpec::from_network(&net),
    };
    let mut cfg = estimator_config(a.tolerance, a.max_iterations)?;
    cfg.keep_matrix = a.dump_kkt.is_some();
    let kind: EstimatorKind = a.estimator.into();
    let res = input(run(kind, &grid, &meas.measurements, &cs, &cfg).map_err(Into::into))?;

    if let (Some(path), Some(m)) = (&a.dump_kkt, &res.last_matrix) {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        m.write_coordinate(std::io::BufWriter::new(file))?;
    }
    emit(c.out.as_deref(), &(serde_json::to_string_pretty(&res.to_json(&net))? + "\n"))?;
    if !res.converged {
        log::error!("{kind} did not converge in {} iterations", res.iterations);
    }
    Ok(res.converged)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let c = &a.common;
    let net = load_network(&c.network, c.load_mult)?;
    let placement = require_placement(c, &net)?;
    let grid = Grid::new(net.clone());
    let truth = true_state(&grid)?;
    let set = input(simulate_measurements(&grid, &truth, &placement, &NoiseSpec::default().with_seed(c.seed)).map_err(Into::into))?;
    emit(c.out.as_deref(), &set.to_jsonl(&net))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn bench(a: BenchArgs) -> Result<()> {
    let c = &a.common;
    if a.trials == 0 {
        return input(Err(anyhow::anyhow!("--trials must be at least 1")));
    }
    let net = load_network(&c.network, c.load_mult)?;
    let placement = require_placement(c, &net)?;
    let label = a.label.clone().unwrap_or_else(|| c.placement.as_deref().map(stem).unwrap_or_default());
    let grid = Grid::new(net);
    let truth = true_state(&grid)?;
    let cfg = MonteCarloConfig {
        trials: a.trials,
        seed: c.seed,
        estimator: estimator_config(a.tolerance, 25)?,
        ..MonteCarloConfig::default()
    };
    let rep = monte_carlo(&grid, &truth, &placement, &cfg)?;
    for (trial, why) in &rep.failures {
        log::warn!("trial {trial} excluded: {why}");
    }
    emit(c.out.as_deref(), &bench_csv(&label, &rep))
}

fn bench_csv(label: &str, rep: &ComparisonReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut s = String::from(
        "instance,estimator,trials,excluded,matrix_size,nonzeros,mean_iterations,mean_time_ms,suf,mean_xi_z,mean_sigma_x2,pif_xi_z,pif_sigma_x2\n",
    );
    for e in &rep.summaries {
        let pif = |f: fn(&ComparisonReport, EstimatorKind) -> Option<f64>| {
            if e.kind == EstimatorKind::Cec { String::new() } else { opt(f(rep, e.kind)) }
        };
        let _ = writeln!(
            s,
            "{label},{},{},{},{},{},{:.3},{:.4},{},{:.6},{:.6e},{},{}",
            e.kind,
            rep.trials.len(),
            rep.failures.len(),
            e.matrix_size,
            e.matrix_nnz,
            e.mean_iterations,
            e.mean_time_ms,
            opt(rep.suf()),
            e.mean_xi_z,
            e.mean_sigma_x2,
            pif(ComparisonReport::pif_xi),
            pif(ComparisonReport::pif_sigma),
        );
    }
    s
}

fn stress(a: StressArgs) -> Result<bool> {
    let net = load_network(&a.network, 1.0)?;
    let placement = load_placement(&a.placement, &net)?;
    if a.load_mult.iter().any(|m| !(*m >= 1.0)) {
        return input(Err(anyhow::anyhow!("load multipliers must be at least 1")));
    }
    let multipliers = if a.load_mult.is_empty() {
        let edge = feasibility_edge(&net, 1.0, 4.0, 1e-3, &PowerFlowOptions::default())?;
        log::info!("feasibility edge at x{edge:.4}");
        [0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 1.0].iter().map(|f| 1.0 + f * (edge - 1.0)).collect()
    } else {
        a.load_mult.clone()
    };
    let estimators: Vec<EstimatorKind> = a.estimator.iter().map(|&e| e.into()).collect();
    let cfg = StressConfig {
        multipliers,
        estimators: estimators.clone(),
        estimator: estimator_config(a.tolerance, 25)?,
        noise: NoiseSpec::default().with_seed(a.seed),
        ..StressConfig::default()
    };
    let rows = stress_sweep(&net, &placement, &cfg)?;
    let (table, trace) = stress_csv(&rows, &estimators);
    match &a.out {
        Some(path) => {
            emit(Some(path), &table)?;
            let trace_path = path.with_file_name(format!("{}_trace.csv", stem(path)));
            emit(Some(&trace_path), &trace)?;
        }
        None => emit(None, &table)?,
    }
    Ok(rows.iter().filter(|r| r.feasible).all(|r| r.runs.iter().all(|run| run.converged)))
}

fn stress_csv(rows: &[StressRow], estimators: &[EstimatorKind]) -> (String, String) {
    let mut table = String::from("multiplier,feasible,min_voltage_node,min_voltage");
    for k in estimators {
        let _ = write!(table, ",{k}_iterations,{k}_converged");
    }
    table.push('\n');
    let mut trace = String::from("multiplier,estimator,iteration,step_norm\n");
    for r in rows {
        let _ = write!(table, "{:.6},{},{},{:.6}", r.multiplier, r.feasible, r.min_voltage_node, r.min_voltage);
        for k in estimators {
            match r.run(*k) {
                Some(run) => {
                    let _ = write!(table, ",{},{}", run.iterations, run.converged);
                    for (i, norm) in run.step_norms.iter().enumerate() {
                        let _ = writeln!(trace, "{:.6},{k},{},{norm:.6e}", r.multiplier, i + 1);
                    }
                }
                None => table.push_str(",,"),
            }
        }
        table.push('\n');
    }
    (table, trace)
}

fn kernel_bench(a: KernelBenchArgs) {
    let vector = Backend::detect();
    let s = Backend::Scalar.throughput(a.len, a.passes);
    let v = vector.throughput(a.len, a.passes);
    println!("backend,kernel,mops_per_s");
    for (name, t) in [("scalar", s), (vector.name(), v)] {
        println!("{name},cmul,{:.1}", t.cmul);
        println!("{name},cfma,{:.1}", t.cfma);
        println!("{name},cdot,{:.1}", t.cdot);
    }
    if v.cfma < s.cfma {
        log::warn!("vectorized cfma slower than scalar on this machine");
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    input(fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display())))?;
    let sets = match a.size {
        Size::Desk => vec![FixtureSet::desk()?],
        Size::Large => vec![FixtureSet::large()?],
        Size::Both => vec![FixtureSet::desk()?, FixtureSet::large()?],
    };
    for set in sets {
        for path in set.write(&a.out)? {
            println!("{}", path.display());
        }
    }
    Ok(())
}
