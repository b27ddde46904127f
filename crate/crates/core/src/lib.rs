//! Coherence-assisted quantum Szilard engine.
//!
//! - [`matrixcore`]: density-matrix kernel (validation, Jacobi spectra,
//!   entropies, relative entropy of coherence, partial traces, Haar unitaries).
//! - [`szilard`]: the five-stage cycle with a coherent demon qubit, closed-form
//!   work/heat/efficiency, critical-probability root finds and a truncated
//!   full-density-matrix oracle of every stage.
//! - [`ihe`]: Monte-Carlo check of the coherence-modified second law of a
//!   measurement-feedback information heat engine.
//! - [`pathtools`]: incoherent/coherent heat and work along a discretized path.
//! - [`cli`]: the batch front-end behind the `qse` binary.

pub mod cli;
pub mod ihe;
pub mod matrixcore;
pub mod pathtools;
mod roots;
pub mod szilard;

pub use roots::{bisect, scan_sign_change, BisectError, BisectOptions};
