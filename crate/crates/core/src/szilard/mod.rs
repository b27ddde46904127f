//! The coherence-assisted Szilard cycle.
//!
//! Reduced units: `ħ²π²/(2m) = 1` and `k_B = 1` unless configured otherwise.

mod cycle;
mod demon;
mod oracle;
mod well;

use thiserror::Error;

use crate::matrixcore::MatrixError;

pub use cycle::{
    critical_probability, critical_residual, cycle_report, cycle_report_at, zero_work_probability, CycleReport,
};
pub use demon::{demon_coherence, final_demon, thermal_demon, DemonState};
pub use oracle::{
    default_expansion_endpoints, oracle_run_cycle, BasisLabel, OracleRun, Sector, StageTag, TruncatedCycleState,
};
pub use well::{
    energy_level, equilibrium_wall_position, insertion_probabilities, log_level_populations, log_partition_function,
    partition_function, wall_force, PartitionSum, WellConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SzilardError {
    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid demon state: {0}")]
    InvalidDemon(String),

    #[error(
        "truncation insufficient at width {width}, T = {temperature}: n_max = {n_max} leaves relative tail {relative_tail:e}"
    )]
    TruncationInsufficient { width: f64, temperature: f64, n_max: usize, relative_tail: f64 },

    #[error("degenerate cycle: Q_tot = {q_tot:e}, efficiency undefined")]
    DegenerateCycle { q_tot: f64 },

    #[error("{what}: no sign change ({detail})")]
    NoSignChange { what: &'static str, detail: String },

    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, SzilardError>;
