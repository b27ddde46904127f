//! Dense complex matrices, density-matrix validation, spectra, entropies,
//! coherence and Haar-random unitaries.
//!
//! Entropies are in nats. The reference basis for dephasing and coherence is
//! always the computational basis of the matrix representation.

mod density;
mod eigen;
mod haar;
mod matrix;

use thiserror::Error;

pub use density::{
    binary_entropy, conjugate, dephase, hermitian_eigenvalues, partial_trace, relative_entropy_of_coherence,
    shannon_entropy, tensor, trace_rho_log_sigma, von_neumann_entropy, DensityMatrix, Keep, LogTrace,
    ProbabilityVector, Tolerances,
};
pub(crate) use density::entropy_of_weights;
pub use eigen::{hermitian_eigen, qubit_eigenvalues, HermitianEigen};
pub use haar::haar_unitary;
pub use matrix::{ComplexMatrix, MatrixParts};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("not Hermitian: max |m[i][j] - conj(m[j][i])| = {violation:e}")]
    NotHermitian { violation: f64 },

    #[error("trace is not one: Tr = {trace}")]
    TraceNotOne { trace: f64 },

    #[error("not positive semidefinite: min eigenvalue = {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not unitary: max |U†U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid probability vector: {reason}")]
    InvalidSimplex { reason: String },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("tolerance `{name}` must be positive and finite, got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, MatrixError>;
