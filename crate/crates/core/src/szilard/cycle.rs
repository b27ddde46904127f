//! Closed-form cycle thermodynamics and the two critical probabilities.

use serde::Serialize;

use super::demon::{demon_coherence, final_demon, DemonState};
use super::well::{insertion_probabilities, WellConfig};
use super::{Result, SzilardError};
use crate::matrixcore::binary_entropy;
use crate::roots::{bisect, scan_sign_change, BisectError, BisectOptions};

/// Work, heat, entropy and efficiency of one cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    pub p_l: f64,
    pub p_r: f64,
    pub w_mea: f64,
    pub de_tot: f64,
    pub delta_sc: f64,
    pub delta_cr: f64,
    pub q_incoh: f64,
    pub q_coh: f64,
    pub q_tot: f64,
    pub w_incoh: f64,
    pub w_coh: f64,
    pub w_tot: f64,
    /// `None` when `|Q_tot|` is below the eigen tolerance.
    pub eta: Option<f64>,
    pub eta_carnot: f64,
    pub demon_initial: DemonState,
    pub demon_final: DemonState,
}

impl CycleReport {
    pub fn efficiency(&self) -> Result<f64> {
        self.eta.ok_or(SzilardError::DegenerateCycle { q_tot: self.q_tot })
    }

    /// Numeric fields in a fixed order, for field-by-field comparisons.
    pub fn numeric_fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("p_l", self.p_l),
            ("p_r", self.p_r),
            ("w_mea", self.w_mea),
            ("de_tot", self.de_tot),
            ("delta_sc", self.delta_sc),
            ("delta_cr", self.delta_cr),
            ("q_incoh", self.q_incoh),
            ("q_coh", self.q_coh),
            ("q_tot", self.q_tot),
            ("w_incoh", self.w_incoh),
            ("w_coh", self.w_coh),
            ("w_tot", self.w_tot),
            ("eta", self.eta.unwrap_or(f64::NAN)),
            ("eta_carnot", self.eta_carnot),
            ("demon_final.p_g", self.demon_final.p_g),
            ("demon_final.f.re", self.demon_final.f.re),
            ("demon_final.f.im", self.demon_final.f.im),
        ]
    }

    /// Largest absolute field difference and the field it occurs in. A field
    /// that is undefined in exactly one report counts as infinite.
    pub fn max_abs_diff(&self, other: &CycleReport) -> (f64, &'static str) {
        let mut worst = (0.0, "none");
        for ((name, a), (_, b)) in self.numeric_fields().into_iter().zip(other.numeric_fields()) {
            let d = match (a.is_nan(), b.is_nan()) {
                (true, true) => 0.0,
                (false, false) => (a - b).abs(),
                _ => f64::INFINITY,
            };
            if d > worst.0 {
                worst = (d, name);
            }
        }
        worst
    }
}

/// Energy bookkeeping shared by the closed form and the matrix oracle.
pub(crate) struct CycleTerms {
    pub p_l: f64,
    pub p_r: f64,
    pub w_mea: f64,
    pub de_tot: f64,
    pub delta_sc: f64,
    pub delta_cr: f64,
    pub q_tot: f64,
    pub demon_initial: DemonState,
    pub demon_final: DemonState,
}

pub(crate) fn assemble(cfg: &WellConfig, t: CycleTerms) -> CycleReport {
    let temperature = cfg.temperature;
    let q_incoh = temperature * t.delta_sc;
    let q_coh = cfg.k_b * temperature * t.delta_cr;
    let w_tot = t.q_tot - t.de_tot;
    let w_incoh = q_incoh - t.de_tot;
    let eta = if t.q_tot.abs() > cfg.tolerances.eig { Some(1.0 - t.de_tot / t.q_tot) } else { None };
    CycleReport {
        p_l: t.p_l,
        p_r: t.p_r,
        w_mea: t.w_mea,
        de_tot: t.de_tot,
        delta_sc: t.delta_sc,
        delta_cr: t.delta_cr,
        q_incoh,
        q_coh,
        q_tot: t.q_tot,
        w_incoh,
        w_coh: q_coh,
        w_tot,
        eta,
        eta_carnot: cfg.carnot_efficiency(),
        demon_initial: t.demon_initial,
        demon_final: t.demon_final,
    }
}

/// Closed-form report at a given right-side probability `P_R`.
///
/// Only the demon, the temperatures and `P_R` enter; the well geometry is
/// not consulted, so `P_R` can be swept directly.
pub fn cycle_report_at(cfg: &WellConfig, d: &DemonState, p_r: f64) -> CycleReport {
    let p_l = 1.0 - p_r;
    let fin = final_demon(d, p_l);
    let de_tot = p_r * (d.p_g - d.p_e()) * cfg.gap;
    let delta_sc = cfg.k_b * (binary_entropy(fin.p_g) - binary_entropy(d.p_g));
    let delta_cr = demon_coherence(d) - demon_coherence(&fin);
    let q_tot = cfg.temperature * (delta_sc + cfg.k_b * delta_cr);
    assemble(
        cfg,
        CycleTerms {
            p_l,
            p_r,
            w_mea: de_tot,
            de_tot,
            delta_sc,
            delta_cr,
            q_tot,
            demon_initial: *d,
            demon_final: fin,
        },
    )
}

/// Closed-form report with `P_R` from the truncated partition sums.
pub fn cycle_report(cfg: &WellConfig, d: &DemonState) -> Result<CycleReport> {
    let (_, p_r) = insertion_probabilities(cfg)?;
    Ok(cycle_report_at(cfg, d, p_r))
}

/// Interior grid used to bracket roots in `P_R ∈ (0, 1)`.
fn probability_grid() -> Vec<f64> {
    let mut grid = vec![1e-6, 1e-5, 1e-4, 5e-4];
    grid.extend((1..1000).map(|i| i as f64 / 1000.0));
    grid.push(1.0 - 1e-6);
    grid
}

fn require_population_inversion(d: &DemonState, what: &'static str) -> Result<()> {
    if d.p_g > d.p_e() {
        Ok(())
    } else {
        Err(SzilardError::NoSignChange {
            what,
            detail: format!("requires p_g > p_e, got p_g = {}", d.p_g),
        })
    }
}

fn root_in_unit_interval<F>(f: F, what: &'static str, opts: BisectOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = scan_sign_change(&f, &probability_grid()).ok_or_else(|| SzilardError::NoSignChange {
        what,
        detail: "no crossing strictly inside (0, 1)".into(),
    })?;
    bisect(&f, lo, hi, opts).map_err(|e| match e {
        BisectError::NoSignChange { lo, hi } => SzilardError::NoSignChange {
            what,
            detail: format!("lost bracket [{lo}, {hi}]"),
        },
        BisectError::NonFinite { x } => SzilardError::NoSignChange { what, detail: format!("non-finite at {x}") },
    })
}

/// Residual of the critical-probability condition
/// `T_D(ΔS_c + k_B ΔC_r) − P_R (p_g − p_e) Δ`.
pub fn critical_residual(cfg: &WellConfig, d: &DemonState, p_r: f64) -> f64 {
    let r = cycle_report_at(cfg, d, p_r);
    cfg.demon_temperature * (r.delta_sc + cfg.k_b * r.delta_cr) - r.de_tot
}

/// `P_R^cri`: below it the efficiency exceeds `1 − T_D/T`.
pub fn critical_probability(cfg: &WellConfig, d: &DemonState) -> Result<f64> {
    require_population_inversion(d, "critical_probability")?;
    root_in_unit_interval(|p| critical_residual(cfg, d, p), "critical_probability", BisectOptions::default())
}

/// `P_R^0`: the total work vanishes there.
pub fn zero_work_probability(cfg: &WellConfig, d: &DemonState) -> Result<f64> {
    require_population_inversion(d, "zero_work_probability")?;
    let opts = BisectOptions { x_floor: 0.0, f_tol: 1e-13, ..Default::default() };
    root_in_unit_interval(|p| cycle_report_at(cfg, d, p).w_tot, "zero_work_probability", opts)
}
