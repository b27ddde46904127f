//! Bracketing root finders shared by the cycle and wall-balance solvers.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BisectError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("function is not finite at {x}")]
    NonFinite { x: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct BisectOptions {
    pub max_iter: usize,
    /// Stop once the bracket is narrower than this.
    pub x_floor: f64,
    /// Stop once `|f(mid)|` is at most this.
    pub f_tol: f64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self { max_iter: 200, x_floor: 1e-12, f_tol: 0.0 }
    }
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)·f(hi) ≤ 0`.
///
/// Returns whichever of the final bracket's points has the smaller `|f|`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, opts: BisectOptions) -> Result<f64, BisectError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(BisectError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(BisectError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(BisectError::NoSignChange { lo, hi });
    }
    for _ in 0..opts.max_iter {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(BisectError::NonFinite { x: mid });
        }
        if fm == 0.0 || fm.abs() <= opts.f_tol {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
        if (b - a).abs() <= opts.x_floor && opts.f_tol == 0.0 {
            break;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// First adjacent pair of `grid` over which `f` changes sign, with the
/// function values at both ends.
pub fn scan_sign_change<F>(mut f: F, grid: &[f64]) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let fx = f(x);
        if !fx.is_finite() {
            prev = None;
            continue;
        }
        if let Some((px, pf)) = prev {
            if pf == 0.0 || pf.signum() != fx.signum() {
                return Some((px, x));
            }
        }
        prev = Some((x, fx));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, BisectOptions::default()).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_same_sign() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, BisectOptions::default()),
            Err(BisectError::NoSignChange { .. })
        ));
    }

    #[test]
    fn f_tol_drives_to_machine_precision() {
        let opts = BisectOptions { f_tol: 1e-15, ..Default::default() };
        let r = bisect(|x| x.cos() - x, 0.0, 1.0, opts).unwrap();
        assert!((r.cos() - r).abs() < 1e-15);
    }

    #[test]
    fn scan_finds_first_crossing() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let (a, b) = scan_sign_change(|x| (x - 2.05) * (x - 7.05), &grid).unwrap();
        assert!(a < 2.05 && b > 2.05);
        assert!(scan_sign_change(|x| x + 1.0, &grid).is_none());
    }
}
