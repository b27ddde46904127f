//! Cyclic Jacobi diagonalization of small dense Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a[p][q]` with a
//! diagonal unitary and then applies the classical real Jacobi rotation, so
//! the accumulated transform is exactly unitary up to rounding. Zero pivots
//! are skipped, which makes block-diagonal inputs (the stage states of the
//! cycle oracle) cost only the work their blocks need.

use num_complex::Complex64;

use super::{ComplexMatrix, MatrixError, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V · diag(values) · V†`, values sorted descending
/// and the columns of `vectors` in the same order.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V · diag(values) · V†` for a modified spectrum.
    pub fn reconstruct(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lambda;
                if vi == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

fn off_diagonal_norm_sq(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += a[(i, j)].norm_sqr();
        }
    }
    2.0 * acc
}

/// Diagonalizes a Hermitian matrix. Only the Hermitian part of the input is
/// meaningful; callers validate hermiticity beforehand.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize so the rotations see an exactly Hermitian matrix
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let h = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = h;
            a[(j, i)] = h.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);

    let scale: f64 = a.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = if scale == 0.0 { 0.0 } else { (f64::EPSILON * 1e-2 * scale).powi(2) };

    let mut converged = n <= 1;
    for _sweep in 0..MAX_SWEEPS {
        if converged || off_diagonal_norm_sq(&a) <= threshold {
            converged = true;
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // pivots far below rounding of the diagonal are dropped
                if r <= 0.5 * f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) || r * r <= threshold * 1e-4 {
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let phase = apq / r; // e^{iφ}
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;

                // A ← A G (columns p, q)
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * gpp + akq * gqp;
                    a[(k, q)] = akp * gpq + akq * gqq;
                }
                // A ← G† A (rows p, q)
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(app - t * r, 0.0);
                a[(q, q)] = Complex64::new(aqq + t * r, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * gpp + vkq * gqp;
                    v[(k, q)] = vkp * gpq + vkq * gqq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && off_diagonal_norm_sq(&a) > threshold {
        return Err(MatrixError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Closed-form spectrum of a 2×2 density matrix `[[p_g, F], [F*, 1−p_g]]`:
/// `λ± = (1 ± sqrt((p_g − p_e)² + 4|F|²)) / 2`, returned as `(λ+, λ−)`.
pub fn qubit_eigenvalues(p_g: f64, f: Complex64) -> (f64, f64) {
    let p_e = 1.0 - p_g;
    let root = ((p_g - p_e).powi(2) + 4.0 * f.norm_sqr()).sqrt();
    (0.5 * (1.0 + root), 0.5 * (1.0 - root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn diagonal_input_sorted() {
        let e = hermitian_eigen(&ComplexMatrix::diagonal_from(&[0.3, 0.7])).unwrap();
        assert_eq!(e.values, vec![0.7, 0.3]);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[1usize, 2, 3, 5, 8, 16, 33, 64] {
            let m = random_hermitian(n, &mut rng);
            let e = hermitian_eigen(&m).unwrap();
            assert!(e.vectors.unitarity_violation() < 1e-12, "n={n}");
            let back = e.reconstruct(&e.values);
            assert!(back.max_abs_diff(&m) < 1e-12, "n={n}: {}", back.max_abs_diff(&m));
            let tr: f64 = e.values.iter().sum();
            assert!((tr - m.trace().re).abs() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn residual_per_eigenpair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_hermitian(12, &mut rng);
        let e = hermitian_eigen(&m).unwrap();
        for k in 0..12 {
            let mut worst = 0.0f64;
            for i in 0..12 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..12 {
                    acc += m[(i, j)] * e.vectors[(j, k)];
                }
                worst = worst.max((acc - e.vectors[(i, k)] * e.values[k]).norm());
            }
            assert!(worst < 1e-12);
        }
    }

    #[test]
    fn qubit_closed_form_matches_solver() {
        let p_g: f64 = 0.7311;
        let f = Complex64::new(0.7 * (p_g * (1.0 - p_g)).sqrt(), 0.0);
        let m = ComplexMatrix::from_rows(&[
            vec![Complex64::new(p_g, 0.0), f],
            vec![f.conj(), Complex64::new(1.0 - p_g, 0.0)],
        ])
        .unwrap();
        let (lp, lm) = qubit_eigenvalues(p_g, f);
        let e = hermitian_eigen(&m).unwrap();
        assert!((e.values[0] - lp).abs() < 1e-12);
        assert!((e.values[1] - lm).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum() {
        let e = hermitian_eigen(&ComplexMatrix::identity(6).scale_real(0.25)).unwrap();
        assert!(e.values.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }
}
