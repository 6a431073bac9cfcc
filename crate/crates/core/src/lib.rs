//! Hybrid SCADA/PMU state estimation in complex variables.
//!
//! The crate evaluates measurement models with Wirtinger derivatives,
//! assembles and solves the (constrained) complex normal equations, and
//! runs three estimators: plain complex normal equations ([`EstimatorKind::Cne`]),
//! complex equality-constrained ([`EstimatorKind::Cec`]) and a polar
//! real-variable baseline ([`EstimatorKind::Rec`]).

pub mod assembly;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod measurement;
pub mod network;
pub mod sparse;

pub use assembly::{assemble_gain, assemble_kkt, factor_solve, GainSystem, KktSolution, KktSystem};
pub use error::{Error, Result};
pub use estimators::{
    check_convergence, run, run_cec, run_cne, run_rec, EstimationResult, EstimatorConfig, EstimatorKind,
};
pub use measurement::{
    eval_constraints, eval_h, eval_jacobians, ConstraintSpec, ConstraintSystem, Location, Measurement,
    MeasurementKind, MeasurementSet, WirtingerSystem,
};
pub use network::{build_admittance, parse_network, AdmittanceMatrix, BranchEnd, Grid, Network, StateVector};
pub use num_complex::Complex64;
pub use sparse::SparseMatrix;
