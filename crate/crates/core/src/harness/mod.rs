//! Measurement simulation, accuracy indices, Monte-Carlo comparison,
//! load-stress sweeps and synthetic fixtures.

pub mod indices;
pub mod monte_carlo;
pub mod placement;
pub mod powerflow;
pub mod simulate;
pub mod stress;
pub mod synth;

pub use indices::{perf_indices, Indices};
pub use monte_carlo::{monte_carlo, ComparisonReport, EstimatorSummary, MonteCarloConfig, TrialReport};
pub use placement::Placement;
pub use powerflow::{solve_power_flow, PowerFlowOptions, PowerFlowSolution};
pub use simulate::{simulate_measurements, simulate_with_rng, NoiseSpec};
pub use stress::{feasibility_edge, stress_sweep, StressConfig, StressRow, StressRun};
pub use synth::{generate_network, generate_placement, FixtureSet, PlacementSpec, SynthSpec};
