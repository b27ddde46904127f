//! Particle-in-a-box thermodynamics of the engine's working system.
//!
//! Levels are `E_n(x) = ε n² / x²` with `ε = ħ²π²/(2m)` (`level_scale`,
//! default 1). Partition sums are evaluated in log space relative to the
//! ground term so narrow wells never underflow.

use serde::{Deserialize, Serialize};

use super::{Result, SzilardError};
use crate::matrixcore::Tolerances;
use crate::roots::{bisect, BisectError, BisectOptions};

/// Box, baths, demon gap and truncation settings of one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WellConfig {
    /// Box length `L`.
    pub length: f64,
    /// Insertion position `l`, `0 < l < L`.
    pub insertion: f64,
    /// System bath temperature `T`.
    pub temperature: f64,
    /// Demon temperature `T_D`.
    pub demon_temperature: f64,
    /// Demon gap `Δ = E_e − E_g`.
    pub gap: f64,
    /// Demon ground energy `E_g`.
    pub ground_energy: f64,
    pub n_max: usize,
    pub tail_eps: f64,
    pub k_b: f64,
    /// `ħ²π²/(2m)` in the chosen units.
    pub level_scale: f64,
    pub tolerances: Tolerances,
}

impl Default for WellConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            insertion: 0.5,
            temperature: 1.0,
            demon_temperature: 0.5,
            gap: 0.5,
            ground_energy: 0.0,
            n_max: 50,
            tail_eps: 1e-12,
            k_b: 1.0,
            level_scale: 1.0,
            tolerances: Tolerances::default(),
        }
    }
}

impl WellConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(SzilardError::InvalidConfig { field, reason });
        let positive = [
            ("length", self.length),
            ("temperature", self.temperature),
            ("demon_temperature", self.demon_temperature),
            ("gap", self.gap),
            ("tail_eps", self.tail_eps),
            ("k_b", self.k_b),
            ("level_scale", self.level_scale),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(field, format!("must be positive and finite, got {v}"));
            }
        }
        if !(self.insertion > 0.0 && self.insertion < self.length) {
            return bad("insertion", format!("must lie strictly inside (0, {}), got {}", self.length, self.insertion));
        }
        if !self.ground_energy.is_finite() {
            return bad("ground_energy", "must be finite".into());
        }
        if self.n_max < 1 {
            return bad("n_max", "must be at least 1".into());
        }
        self.tolerances.validate()?;
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        1.0 / (self.k_b * self.temperature)
    }

    pub fn carnot_efficiency(&self) -> f64 {
        1.0 - self.demon_temperature / self.temperature
    }
}

/// `E_n(x) = n²/x²` in units of `ħ²π²/(2m)`.
pub fn energy_level(n: usize, width: f64) -> f64 {
    let n = n as f64;
    n * n / (width * width)
}

/// A truncated partition sum `Z(x) = e^{−a} · scaled_sum`, `a = βε/x²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSum {
    pub ln_z: f64,
    /// Number of levels actually summed.
    pub levels: usize,
    /// Upper bound on the omitted tail relative to the sum.
    pub relative_tail: f64,
}

fn reduced_gap(width: f64, temperature: f64, cfg: &WellConfig) -> f64 {
    cfg.level_scale / (cfg.k_b * temperature * width * width)
}

/// `∫_N^∞ e^{−a(u²−1)} du`.
fn gaussian_tail(a: f64, n: f64) -> f64 {
    let x = n * a.sqrt();
    if x < 20.0 {
        a.exp() * 0.5 * (std::f64::consts::PI / a).sqrt() * libm::erfc(x)
    } else {
        // asymptotic upper bound, tight once the argument is large
        (-a * (n * n - 1.0)).exp() / (2.0 * a * n)
    }
}

/// Truncated `ln Z(x)` with the stopping rule and tail check.
pub fn log_partition_function(width: f64, temperature: f64, cfg: &WellConfig) -> Result<PartitionSum> {
    if !(width > 0.0 && temperature > 0.0) {
        return Err(SzilardError::InvalidConfig {
            field: "width",
            reason: format!("width and temperature must be positive, got {width}, {temperature}"),
        });
    }
    let a = reduced_gap(width, temperature, cfg);
    let mut sum = 0.0;
    let mut levels = cfg.n_max;
    for n in 1..=cfg.n_max {
        let nf = n as f64;
        let term = (-a * (nf * nf - 1.0)).exp();
        sum += term;
        if n > 1 && term < cfg.tail_eps * sum {
            levels = n;
            break;
        }
    }
    let relative_tail = gaussian_tail(a, levels as f64) / sum;
    if !(relative_tail < cfg.tail_eps) {
        return Err(SzilardError::TruncationInsufficient {
            width,
            temperature,
            n_max: cfg.n_max,
            relative_tail,
        });
    }
    Ok(PartitionSum { ln_z: -a + sum.ln(), levels, relative_tail })
}

/// `Z(x) = Σ_n e^{−βE_n(x)}`, truncated.
pub fn partition_function(width: f64, temperature: f64, cfg: &WellConfig) -> Result<f64> {
    Ok(log_partition_function(width, temperature, cfg)?.ln_z.exp())
}

/// `ln P_n(x)` for `n = 1..=n_max`, normalized over all `n_max` levels. The
/// truncation is first checked with [`log_partition_function`].
pub fn log_level_populations(width: f64, temperature: f64, cfg: &WellConfig) -> Result<Vec<f64>> {
    log_partition_function(width, temperature, cfg)?;
    let a = reduced_gap(width, temperature, cfg);
    let exponents: Vec<f64> = (1..=cfg.n_max).map(|n| -a * ((n * n) as f64 - 1.0)).collect();
    let ln_sum = exponents.iter().map(|e| e.exp()).sum::<f64>().ln();
    Ok(exponents.into_iter().map(|e| e - ln_sum).collect())
}

/// Quantum insertion probabilities `(P_L, P_R)` with
/// `P_L = Z(l) / [Z(l) + Z(L−l)]`.
pub fn insertion_probabilities(cfg: &WellConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let left = log_partition_function(cfg.insertion, cfg.temperature, cfg)?.ln_z;
    let right = log_partition_function(cfg.length - cfg.insertion, cfg.temperature, cfg)?.ln_z;
    let p_l = 1.0 / (1.0 + (right - left).exp());
    let p_r = 1.0 / (1.0 + (left - right).exp());
    Ok((p_l, p_r))
}

/// Gas force on a wall bounding a well of this width:
/// `k_B T · d ln Z/dx = Σ_n P_n(x) · 2E_n(x)/x`.
pub fn wall_force(width: f64, temperature: f64, cfg: &WellConfig) -> Result<f64> {
    let sum = log_partition_function(width, temperature, cfg)?;
    let a = reduced_gap(width, temperature, cfg);
    let mut weight = 0.0;
    let mut moment = 0.0;
    for n in 1..=sum.levels {
        let n2 = (n * n) as f64;
        let t = (-a * (n2 - 1.0)).exp();
        weight += t;
        moment += t * n2;
    }
    Ok(cfg.k_b * temperature * 2.0 * a * moment / (weight * width))
}

/// Position `x ∈ (0, L)` where `w_L f(x) = w_R f(L − x)`.
pub fn equilibrium_wall_position(cfg: &WellConfig, weights: (f64, f64)) -> Result<f64> {
    let (w_l, w_r) = weights;
    if !(w_l > 0.0 && w_r > 0.0 && ((w_l + w_r) - 1.0).abs() < 1e-9) {
        return Err(SzilardError::NoSignChange {
            what: "equilibrium_wall_position",
            detail: format!("weights must be positive and sum to one, got ({w_l}, {w_r})"),
        });
    }
    let length = cfg.length;
    if w_l == w_r {
        return Ok(length / 2.0);
    }
    let t = cfg.temperature;
    let balance = |x: f64| -> f64 {
        match (wall_force(x, t, cfg), wall_force(length - x, t, cfg)) {
            (Ok(fl), Ok(fr)) => w_l * fl - w_r * fr,
            _ => f64::NAN,
        }
    };
    // shrink the margin until the bracket straddles the root
    let mut margin = 1e-3;
    while margin > 1e-15 {
        let lo = length * margin;
        let hi = length * (1.0 - margin);
        let (flo, fhi) = (balance(lo), balance(hi));
        if flo.is_nan() || fhi.is_nan() {
            // truncation failed at the bracket ends
            wall_force(lo, t, cfg)?;
            wall_force(length - lo, t, cfg)?;
        }
        if flo.signum() != fhi.signum() {
            let opts = BisectOptions { x_floor: 1e-15 * length, ..Default::default() };
            return bisect(balance, lo, hi, opts).map_err(|e| match e {
                BisectError::NoSignChange { lo, hi } => SzilardError::NoSignChange {
                    what: "equilibrium_wall_position",
                    detail: format!("no force balance on [{lo}, {hi}]"),
                },
                BisectError::NonFinite { x } => SzilardError::NoSignChange {
                    what: "equilibrium_wall_position",
                    detail: format!("force not finite at {x}"),
                },
            });
        }
        margin *= 1e-3;
    }
    Err(SzilardError::NoSignChange {
        what: "equilibrium_wall_position",
        detail: format!("force balance with weights ({w_l}, {w_r}) not bracketed inside the box"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WellConfig {
        WellConfig::default()
    }

    /// Independent plain summation over `levels` terms.
    fn brute_z(width: f64, t: f64, levels: usize) -> f64 {
        (1..=levels).map(|n| (-energy_level(n, width) / t).exp()).sum()
    }

    #[test]
    fn level_scaling() {
        assert_eq!(energy_level(1, 1.0), 1.0);
        assert_eq!(energy_level(3, 1.0), 9.0);
        for n in 1..5 {
            assert_eq!(energy_level(n, 2.0), energy_level(n, 1.0) / 4.0);
        }
    }

    #[test]
    fn partition_matches_refined_summation() {
        let z = partition_function(1.0, 1.0, &cfg()).unwrap();
        let refined = brute_z(1.0, 1.0, 100);
        assert!((z - refined).abs() <= 1e-12 * refined);
    }

    #[test]
    fn low_temperature_ground_term_dominates() {
        let t = 0.01;
        let z = partition_function(1.0, t, &cfg()).unwrap();
        let ground = (-1.0f64 / t).exp();
        assert!(((z - ground) / ground).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_width() {
        let c = cfg();
        let mut prev = 0.0;
        for i in 1..40 {
            let ln_z = log_partition_function(0.05 * i as f64, 1.0, &c).unwrap().ln_z;
            assert!(ln_z > prev || i == 1);
            prev = ln_z;
        }
    }

    #[test]
    fn truncation_error_when_levels_too_few() {
        let c = WellConfig { n_max: 3, ..cfg() };
        assert!(matches!(
            partition_function(1.0, 10.0, &c),
            Err(SzilardError::TruncationInsufficient { .. })
        ));
        let c = WellConfig { n_max: 50, ..cfg() };
        assert!(matches!(
            partition_function(3.0, 100.0, &c),
            Err(SzilardError::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn symmetric_insertion() {
        let (pl, pr) = insertion_probabilities(&cfg()).unwrap();
        assert!((pl - 0.5).abs() < 1e-15 && (pr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn insertion_near_right_end() {
        let c = WellConfig { insertion: 0.999, ..cfg() };
        let (pl, pr) = insertion_probabilities(&c).unwrap();
        assert!(pl > 1.0 - 1e-12 && (pl + pr - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantum_insertion_differs_from_classical() {
        let c = WellConfig { insertion: 0.3, ..cfg() };
        let (pl, pr) = insertion_probabilities(&c).unwrap();
        let zl = brute_z(0.3, 1.0, 60);
        let zr = brute_z(0.7, 1.0, 60);
        assert!((pl - zl / (zl + zr)).abs() < 1e-13);
        assert!((pl + pr - 1.0).abs() < 1e-15);
        // narrow wells are suppressed far below the classical l/L
        assert!(pl < 0.3 - 0.1);
    }

    #[test]
    fn force_matches_finite_difference() {
        let c = cfg();
        for &(w, t) in &[(0.5, 1.0), (0.3, 2.0), (0.9, 0.4), (1.7, 5.0)] {
            let analytic = wall_force(w, t, &c).unwrap();
            let h = 1e-5 * w;
            let up = log_partition_function(w + h, t, &c).unwrap().ln_z;
            let dn = log_partition_function(w - h, t, &c).unwrap().ln_z;
            let fd = c.k_b * t * (up - dn) / (2.0 * h);
            assert!(((analytic - fd) / analytic).abs() < 1e-6, "w={w} t={t}: {analytic} vs {fd}");
            assert!(analytic > 0.0);
        }
    }

    #[test]
    fn force_decreases_with_width() {
        let c = cfg();
        let f: Vec<f64> = (1..30).map(|i| wall_force(0.1 * i as f64, 1.0, &c).unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] < w[0]));
        let fl = wall_force(0.5, 1.0, &c).unwrap();
        assert_eq!(fl, wall_force(1.0 - 0.5, 1.0, &c).unwrap());
    }

    #[test]
    fn equilibrium_positions() {
        let c = cfg();
        assert_eq!(equilibrium_wall_position(&c, (0.5, 0.5)).unwrap(), 0.5);

        // dense sign-scan oracle for w_L = 0.7
        let (wl, wr) = (0.7, 0.3);
        let x = equilibrium_wall_position(&c, (wl, wr)).unwrap();
        let g = |x: f64| wl * wall_force(x, 1.0, &c).unwrap() - wr * wall_force(1.0 - x, 1.0, &c).unwrap();
        let grid: Vec<f64> = (1..10_000).map(|i| i as f64 * 1e-4).collect();
        let (a, b) = crate::roots::scan_sign_change(g, &grid).unwrap();
        assert!(a <= x && x <= b, "{a} {x} {b}");
        assert!(x > 0.5);
        let scale = wall_force(x, 1.0, &c).unwrap().max(wall_force(1.0 - x, 1.0, &c).unwrap());
        assert!(g(x).abs() <= 1e-10 * scale);

        let near_one = equilibrium_wall_position(&c, (1.0 - 1e-9, 1e-9)).unwrap();
        assert!(near_one > 0.99 && near_one < 1.0);
        assert!(equilibrium_wall_position(&c, (1.0, 0.0)).is_err());
    }
}
