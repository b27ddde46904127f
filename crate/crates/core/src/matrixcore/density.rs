use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::{hermitian_eigen, HermitianEigen};
use super::{ComplexMatrix, MatrixError, Result};

/// Numerical tolerances shared by the density-matrix kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { herm: 1e-10, trace: 1e-10, psd: 1e-9, eig: 1e-12 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("herm", self.herm), ("trace", self.trace), ("psd", self.psd), ("eig", self.eig)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MatrixError::InvalidTolerance { name, value: v });
            }
        }
        Ok(())
    }
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if p.is_empty() {
            return Err(MatrixError::InvalidSimplex { reason: "empty vector".into() });
        }
        if let Some((k, &x)) = p.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
            return Err(MatrixError::InvalidSimplex { reason: format!("entry {k} = {x} is negative or non-finite") });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > tol.trace {
            return Err(MatrixError::InvalidSimplex { reason: format!("entries sum to {sum}") });
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `−Σ p ln p` with `0·ln 0 = 0`, for any nonnegative weights.
pub(crate) fn entropy_of_weights(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &ProbabilityVector) -> f64 {
    entropy_of_weights(p.as_slice()).max(0.0)
}

/// Binary entropy `H(x) = −x ln x − (1−x) ln(1−x)`.
pub fn binary_entropy(x: f64) -> f64 {
    entropy_of_weights(&[x, 1.0 - x])
}

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `m` against `tol`. The Hermitian part is kept; eigenvalues in
    /// `[−tol.psd, 0)` are clamped to zero and the spectrum renormalized.
    pub fn new(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if !m.is_square() {
            return Err(MatrixError::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        let violation = m.hermiticity_violation();
        if violation > tol.herm {
            return Err(MatrixError::NotHermitian { violation });
        }
        let n = m.rows();
        let mut h = m;
        for i in 0..n {
            h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                h[(i, j)] = avg;
                h[(j, i)] = avg.conj();
            }
        }
        let trace = h.trace().re;
        if (trace - 1.0).abs() > tol.trace {
            return Err(MatrixError::TraceNotOne { trace });
        }
        let eig = hermitian_eigen(&h)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(MatrixError::NotPositive { min_eigenvalue: min });
        }
        if min < 0.0 {
            let clamped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = clamped.iter().sum();
            let renorm: Vec<f64> = clamped.iter().map(|x| x / total).collect();
            h = eig.reconstruct(&renorm);
        }
        Ok(Self { m: h })
    }

    /// Validates with the default tolerances.
    pub fn try_from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(m, &Tolerances::default())
    }

    /// Diagonal state from populations.
    pub fn diagonal(p: &ProbabilityVector) -> Self {
        Self { m: ComplexMatrix::diagonal_from(p.as_slice()) }
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &[Complex64], tol: &Tolerances) -> Result<Self> {
        let n = psi.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::new(m, tol)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn populations(&self) -> Vec<f64> {
        self.m.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn eigen(&self) -> Result<HermitianEigen> {
        hermitian_eigen(&self.m)
    }

    /// Expectation value of a Hermitian observable.
    pub fn expectation(&self, observable: &ComplexMatrix) -> Result<f64> {
        Ok(self.m.matmul(observable)?.trace().re)
    }

    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self { m }
    }
}

/// Real eigenvalues of `ρ`, sorted descending.
pub fn hermitian_eigenvalues(rho: &DensityMatrix) -> Result<Vec<f64>> {
    Ok(rho.eigen()?.values)
}

/// `S(ρ) = −Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let values = hermitian_eigenvalues(rho)?;
    Ok(entropy_of_weights(&values).max(0.0))
}

/// Drops all off-diagonal entries in the computational basis.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix { m: ComplexMatrix::diagonal_from(&rho.populations()) }
}

/// `C_r(ρ) = S(ρ_diag) − S(ρ)`; tiny negative rounding is clamped to zero.
pub fn relative_entropy_of_coherence(rho: &DensityMatrix) -> Result<f64> {
    let diag = entropy_of_weights(&rho.populations());
    Ok((diag - von_neumann_entropy(rho)?).max(0.0))
}

/// Tensor product of two density matrices.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix { m: a.m.kron(&b.m) }
}

/// Which factor of a bipartite space survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace over one factor of a `dim_a · dim_b` space.
pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(MatrixError::DimensionMismatch { expected: da * db, found: rho.dim() });
    }
    let m = &rho.m;
    let out = match keep {
        Keep::A => {
            let mut out = ComplexMatrix::zeros(da, da);
            for i in 0..da {
                for j in 0..da {
                    out[(i, j)] = (0..db).map(|k| m[(i * db + k, j * db + k)]).sum();
                }
            }
            out
        }
        Keep::B => {
            let mut out = ComplexMatrix::zeros(db, db);
            for k in 0..db {
                for l in 0..db {
                    out[(k, l)] = (0..da).map(|i| m[(i * db + k, i * db + l)]).sum();
                }
            }
            out
        }
    };
    Ok(DensityMatrix { m: out })
}

/// `U ρ U†` for a unitary `U` (checked to `tol.eig · dim` scale).
pub fn conjugate(rho: &DensityMatrix, u: &ComplexMatrix, tol: &Tolerances) -> Result<DensityMatrix> {
    if !u.is_square() || u.rows() != rho.dim() {
        return Err(MatrixError::DimensionMismatch { expected: rho.dim(), found: u.rows() });
    }
    u.ensure_unitary(unitary_tolerance(tol, u.rows()))?;
    let mut out = u.sandwich(&rho.m)?;
    let n = out.rows();
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    Ok(DensityMatrix { m: out })
}

pub(crate) fn unitary_tolerance(tol: &Tolerances, dim: usize) -> f64 {
    (tol.eig * dim as f64).max(1e-12)
}

/// Outcome of evaluating `Tr[ρ ln σ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogTrace {
    Value(f64),
    /// `ρ` carries weight outside the support of `σ`; the value is `−∞`.
    SupportDeficient { weight_outside: f64 },
}

/// `Tr[ρ ln σ]` restricted to the support of `σ` (eigenvalues above
/// `support_floor`). Reports [`LogTrace::SupportDeficient`] when `ρ` has more
/// than `leak_tol` weight outside that support.
pub fn trace_rho_log_sigma(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    support_floor: f64,
    leak_tol: f64,
) -> Result<LogTrace> {
    if rho.dim() != sigma.dim() {
        return Err(MatrixError::DimensionMismatch { expected: sigma.dim(), found: rho.dim() });
    }
    let eig = sigma.eigen()?;
    let n = rho.dim();
    let mut value = 0.0;
    let mut outside = 0.0;
    for (k, &lambda) in eig.values.iter().enumerate() {
        // ⟨v_k|ρ|v_k⟩
        let mut w = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let vi = eig.vectors[(i, k)].conj();
            if vi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                w += vi * rho.m[(i, j)] * eig.vectors[(j, k)];
            }
        }
        if lambda > support_floor {
            value += w.re * lambda.ln();
        } else {
            outside += w.re;
        }
    }
    if outside > leak_tol {
        Ok(LogTrace::SupportDeficient { weight_outside: outside })
    } else {
        Ok(LogTrace::Value(value))
    }
}
