//! Monte-Carlo check of the coherence-modified second law for a
//! measurement-feedback engine: system `S`, reservoir `R`, memory `M`.
//!
//! The full space is ordered `M ⊗ S ⊗ R`. The protocol is
//! 1. `U1` on `SR` (the memory idles),
//! 2. `U2` on `MSR`, then a projective measurement of `M` in its
//!    computational basis,
//! 3. feedback `U^k` on `SR` conditioned on outcome `k`.
//!
//! Work and heat follow `W_ext = −ΔE_S + Q_S` with `Q_S = E_R(i) − E_R(f)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrixcore::{
    conjugate, entropy_of_weights, haar_unitary, partial_trace, relative_entropy_of_coherence, von_neumann_entropy,
    ComplexMatrix, DensityMatrix, Keep, MatrixError, MatrixParts, ProbabilityVector, Tolerances,
};

/// Largest supported `d_M · d_S · d_R`.
pub const MAX_DIM: usize = 64;
const UNITARY_TOL: f64 = 1e-12;
const MEMORY_EQUALITY_TOL: f64 = 1e-10;
/// Eigenvalues of the canonical state below this are outside its support.
const SUPPORT_FLOOR: f64 = 1e-14;
const SUPPORT_LEAK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IheError {
    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("trial {trial}: `{check}` violated with residual {residual:e}")]
    BoundViolated { trial: u64, check: &'static str, residual: f64 },

    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, IheError>;

/// How protocols are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// `U1`, `U2` and every `U^k` Haar distributed.
    Haar,
    /// `U2 = Σ_k |k⟩⟨k| ⊗ V_k`: the measured memory populations equal the
    /// initial ones, so `ΔS_c = 0`.
    DiagonalPreserving,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IheConfig {
    pub d_m: usize,
    pub d_s: usize,
    pub d_r: usize,
    pub temperature: f64,
    /// Defaults to `0, 1, …, d_S − 1`.
    pub h_s_initial: Option<Vec<f64>>,
    /// Defaults to `h_s_initial` (no quench).
    pub h_s_final: Option<Vec<f64>>,
    /// Defaults to `0, 1, …, d_R − 1`.
    pub h_r: Option<Vec<f64>>,
    /// Defaults to `|0⟩⟨0|`.
    pub memory_initial: Option<MatrixParts>,
    /// Draw a fresh mixed memory state per trial instead of `memory_initial`.
    pub random_memory: bool,
    pub sampler: Sampler,
    pub trials: u64,
    pub seed: u64,
    pub numerical_slack: f64,
    pub k_b: f64,
    pub near_saturation_cap: usize,
    pub tolerances: Tolerances,
}

impl Default for IheConfig {
    fn default() -> Self {
        Self {
            d_m: 2,
            d_s: 2,
            d_r: 2,
            temperature: 1.0,
            h_s_initial: None,
            h_s_final: None,
            h_r: None,
            memory_initial: None,
            random_memory: false,
            sampler: Sampler::Haar,
            trials: 1000,
            seed: 0,
            numerical_slack: 1e-9,
            k_b: 1.0,
            near_saturation_cap: 16,
            tolerances: Tolerances::default(),
        }
    }
}

fn ladder(d: usize) -> Vec<f64> {
    (0..d).map(|n| n as f64).collect()
}

fn invalid(field: &'static str, reason: impl Into<String>) -> IheError {
    IheError::InvalidConfig { field, reason: reason.into() }
}

/// Validated spectra and temperature.
#[derive(Clone, Debug)]
struct Resolved {
    d_m: usize,
    d_s: usize,
    d_r: usize,
    beta: f64,
    h_s_i: Vec<f64>,
    h_s_f: Vec<f64>,
    h_r: Vec<f64>,
    memory: DensityMatrix,
}

impl IheConfig {
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    pub fn sr_dim(&self) -> usize {
        self.d_s * self.d_r
    }

    pub fn total_dim(&self) -> usize {
        self.d_m * self.d_s * self.d_r
    }

    fn resolve(&self) -> Result<Resolved> {
        for (field, d) in [("d_m", self.d_m), ("d_s", self.d_s), ("d_r", self.d_r)] {
            if d == 0 {
                return Err(invalid(field, "dimension must be at least 1"));
            }
        }
        if self.total_dim() > MAX_DIM {
            return Err(invalid("d_m", format!("d_M·d_S·d_R = {} exceeds {MAX_DIM}", self.total_dim())));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(invalid("temperature", format!("must be positive and finite, got {}", self.temperature)));
        }
        if !(self.k_b > 0.0 && self.k_b.is_finite()) {
            return Err(invalid("k_b", format!("must be positive and finite, got {}", self.k_b)));
        }
        if !(self.numerical_slack >= 0.0 && self.numerical_slack.is_finite()) {
            return Err(invalid("numerical_slack", format!("must be nonnegative, got {}", self.numerical_slack)));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        self.tolerances.validate()?;
        let spectrum = |field: &'static str, v: &Option<Vec<f64>>, fallback: Vec<f64>, d: usize| -> Result<Vec<f64>> {
            let v = v.clone().unwrap_or(fallback);
            if v.len() != d {
                return Err(invalid(field, format!("expected {d} levels, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(field, "energies must be finite"));
            }
            Ok(v)
        };
        let h_s_i = spectrum("h_s_initial", &self.h_s_initial, ladder(self.d_s), self.d_s)?;
        let h_s_f = spectrum("h_s_final", &self.h_s_final, h_s_i.clone(), self.d_s)?;
        let h_r = spectrum("h_r", &self.h_r, ladder(self.d_r), self.d_r)?;
        let memory = match &self.memory_initial {
            Some(parts) => {
                let m = parts.to_matrix()?;
                if m.rows() != self.d_m {
                    return Err(invalid("memory_initial", format!("expected a {0}x{0} matrix", self.d_m)));
                }
                DensityMatrix::new(m, &self.tolerances)?
            }
            None => {
                let mut p = vec![0.0; self.d_m];
                p[0] = 1.0;
                DensityMatrix::diagonal(&ProbabilityVector::new(p, &self.tolerances)?)
            }
        };
        Ok(Resolved {
            d_m: self.d_m,
            d_s: self.d_s,
            d_r: self.d_r,
            beta: 1.0 / (self.k_b * self.temperature),
            h_s_i,
            h_s_f,
            h_r,
            memory,
        })
    }
}

/// Gibbs weights `e^{−βE_n}/Z` and `ln Z`, evaluated relative to the ground level.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let s: f64 = w.iter().sum();
    (w.iter().map(|x| x / s).collect(), -beta * e0 + s.ln())
}

/// `ln` of the Gibbs weights, finite for every level.
fn log_gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let (_, ln_z) = gibbs_weights(energies, beta);
    energies.iter().map(|&e| -beta * e - ln_z).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IheProtocol {
    pub u1_sr: ComplexMatrix,
    pub u2: ComplexMatrix,
    /// One unitary on `SR` per memory outcome.
    pub feedback: Vec<ComplexMatrix>,
    /// Overrides the configured memory state (set by random-memory sampling).
    pub memory_initial: Option<DensityMatrix>,
}

impl IheProtocol {
    /// All unitaries equal to the identity.
    pub fn idle(cfg: &IheConfig) -> Self {
        let sr = cfg.sr_dim();
        Self {
            u1_sr: ComplexMatrix::identity(sr),
            u2: ComplexMatrix::identity(cfg.total_dim()),
            feedback: vec![ComplexMatrix::identity(sr); cfg.d_m],
            memory_initial: None,
        }
    }

    pub fn validate(&self, cfg: &IheConfig) -> Result<()> {
        let sr = cfg.sr_dim();
        let check = |u: &ComplexMatrix, d: usize| -> Result<()> {
            if !u.is_square() || u.rows() != d {
                return Err(MatrixError::DimensionMismatch { expected: d, found: u.rows() }.into());
            }
            u.ensure_unitary(UNITARY_TOL)?;
            Ok(())
        };
        check(&self.u1_sr, sr)?;
        check(&self.u2, cfg.total_dim())?;
        if self.feedback.len() != cfg.d_m {
            return Err(MatrixError::DimensionMismatch { expected: cfg.d_m, found: self.feedback.len() }.into());
        }
        for u in &self.feedback {
            check(u, sr)?;
        }
        if let Some(m) = &self.memory_initial {
            if m.dim() != cfg.d_m {
                return Err(MatrixError::DimensionMismatch { expected: cfg.d_m, found: m.dim() }.into());
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> ProtocolDump {
        ProtocolDump {
            u1_sr: (&self.u1_sr).into(),
            u2: (&self.u2).into(),
            feedback: self.feedback.iter().map(MatrixParts::from).collect(),
            memory_initial: self.memory_initial.as_ref().map(|m| m.matrix().into()),
        }
    }
}

/// Serializable protocol: every unitary as nested real/imaginary arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDump {
    pub u1_sr: MatrixParts,
    pub u2: MatrixParts,
    pub feedback: Vec<MatrixParts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_initial: Option<MatrixParts>,
}

/// Per-trial RNG: a ChaCha20 stream selected by the trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Mixed state with a uniform spectrum on the simplex in a Haar basis.
fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let w: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    let diag = ComplexMatrix::diagonal_from(&w.iter().map(|x| x / s).collect::<Vec<_>>());
    let u = haar_unitary(d, rng);
    let m = u.sandwich(&diag).expect("square");
    DensityMatrix::try_from_matrix(m).expect("conjugated simplex point is a state")
}

/// `Σ_k |k⟩⟨k| ⊗ V_k` for Haar `V_k`.
fn controlled_unitary<R: Rng + ?Sized>(d_m: usize, d_sr: usize, rng: &mut R) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(d_m * d_sr, d_m * d_sr);
    for k in 0..d_m {
        let v = haar_unitary(d_sr, rng);
        for i in 0..d_sr {
            for j in 0..d_sr {
                u[(k * d_sr + i, k * d_sr + j)] = v[(i, j)];
            }
        }
    }
    u
}

/// Draws the memory (when randomized) and then `U1`, `U2`, `U^0 … U^{d_M−1}`.
pub fn sample_protocol<R: Rng + ?Sized>(cfg: &IheConfig, rng: &mut R) -> IheProtocol {
    let sr = cfg.sr_dim();
    let memory_initial = cfg.random_memory.then(|| random_density(cfg.d_m, rng));
    let u1_sr = haar_unitary(sr, rng);
    let u2 = match cfg.sampler {
        Sampler::Haar => haar_unitary(cfg.total_dim(), rng),
        Sampler::DiagonalPreserving => controlled_unitary(cfg.d_m, sr, rng),
    };
    let feedback = (0..cfg.d_m).map(|_| haar_unitary(sr, rng)).collect();
    IheProtocol { u1_sr, u2, feedback, memory_initial }
}

/// `ρ_M ⊗ e^{−βH_S}/Z_S ⊗ e^{−βH_R}/Z_R`.
pub fn build_initial(cfg: &IheConfig) -> Result<DensityMatrix> {
    let r = cfg.resolve()?;
    Ok(initial_state(&r, &r.memory))
}

fn sr_gibbs(r: &Resolved) -> Vec<f64> {
    let (gs, _) = gibbs_weights(&r.h_s_i, r.beta);
    let (gr, _) = gibbs_weights(&r.h_r, r.beta);
    gs.iter().flat_map(|a| gr.iter().map(move |b| a * b)).collect()
}

fn initial_state(r: &Resolved, memory: &DensityMatrix) -> DensityMatrix {
    let sr = ComplexMatrix::diagonal_from(&sr_gibbs(r));
    DensityMatrix::from_trusted(memory.matrix().kron(&sr))
}

/// One inequality of the chain, as `residual ≥ −threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainCheck {
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
    /// Set when the check could not be evaluated (support-deficient Klein step).
    pub skipped: bool,
}

impl ChainCheck {
    pub fn passed(&self) -> bool {
        self.skipped || self.residual >= -self.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IheTrialReport {
    pub p_k: ProbabilityVector,
    pub w_ext: f64,
    pub delta_e_s: f64,
    pub q_s: f64,
    pub delta_f_s: f64,
    /// Memory entropy change, nats.
    pub delta_s: f64,
    /// `SR` entropy change, nats.
    pub delta_s_sr: f64,
    /// Shannon-entropy change of the memory populations, units of `k_B`.
    pub delta_sc: f64,
    pub delta_cr: f64,
    pub bound_rhs: f64,
    pub slack: f64,
    pub chain_checks: Vec<ChainCheck>,
}

impl IheTrialReport {
    pub fn failed_check(&self) -> Option<&ChainCheck> {
        self.chain_checks.iter().find(|c| !c.passed())
    }

    pub fn check(&self, name: &str) -> Option<&ChainCheck> {
        self.chain_checks.iter().find(|c| c.name == name)
    }
}

/// Names of the chain checks, in report order.
pub const CHECK_NAMES: [&str; 7] =
    ["measurement", "subadditivity", "concavity", "memory_equality", "klein", "entropy_increase", "bound"];

fn block(m: &ComplexMatrix, k: usize, n: usize) -> ComplexMatrix {
    let mut b = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = m[(k * n + i, k * n + j)];
        }
    }
    b
}

fn hermitized(mut m: ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    m
}

/// Entropy of an unnormalized positive block `p ρ_k`, returned as `S(ρ_k)`.
fn block_entropy(b: &ComplexMatrix, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Ok(0.0);
    }
    let rho = DensityMatrix::from_trusted(hermitized(b.scale_real(1.0 / p)));
    Ok(von_neumann_entropy(&rho)?)
}

/// `Σ_{s,r} ρ_{(s,r),(s,r)} (E_S[s], E_R[r])`.
fn sr_energies(m: &ComplexMatrix, h_s: &[f64], h_r: &[f64]) -> (f64, f64) {
    let d_r = h_r.len();
    let (mut es, mut er) = (0.0, 0.0);
    for (s, &e) in h_s.iter().enumerate() {
        for (r, &f) in h_r.iter().enumerate() {
            let p = m[(s * d_r + r, s * d_r + r)].re;
            es += p * e;
            er += p * f;
        }
    }
    (es, er)
}

pub fn run_protocol(cfg: &IheConfig, prot: &IheProtocol) -> Result<IheTrialReport> {
    let r = cfg.resolve()?;
    prot.validate(cfg)?;
    run_resolved(cfg, &r, prot)
}

fn run_resolved(cfg: &IheConfig, r: &Resolved, prot: &IheProtocol) -> Result<IheTrialReport> {
    let tol = &cfg.tolerances;
    let slack_tol = cfg.numerical_slack;
    let (d_m, sr) = (r.d_m, r.d_s * r.d_r);
    let memory = prot.memory_initial.as_ref().unwrap_or(&r.memory);

    // (i) product of the memory with Gibbs states
    let gibbs = sr_gibbs(r);
    let s_sr_i = entropy_of_weights(&gibbs);
    let s_m_i = von_neumann_entropy(memory)?;
    let rho_i = initial_state(r, memory);

    // (ii) the memory idles
    let u1 = ComplexMatrix::identity(d_m).kron(&prot.u1_sr);
    let rho_1 = conjugate(&rho_i, &u1, tol)?;

    // (iii) entangle and measure M in its computational basis
    let rotated = conjugate(&rho_1, &prot.u2, tol)?;
    let blocks: Vec<ComplexMatrix> = (0..d_m).map(|k| block(rotated.matrix(), k, sr)).collect();
    let raw: Vec<f64> = blocks.iter().map(|b| b.trace().re.max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let p = ProbabilityVector::new(raw.iter().map(|x| x / total).collect(), tol)?;
    let mut rho_2 = ComplexMatrix::zeros(d_m * sr, d_m * sr);
    for (k, b) in blocks.iter().enumerate() {
        for i in 0..sr {
            for j in 0..sr {
                rho_2[(k * sr + i, k * sr + j)] = b[(i, j)];
            }
        }
    }
    let rho_2 = DensityMatrix::from_trusted(rho_2);
    let s_m_2 = von_neumann_entropy(&partial_trace(&rho_2, (d_m, sr), Keep::A)?)?;
    let s_sr_2 = von_neumann_entropy(&partial_trace(&rho_2, (d_m, sr), Keep::B)?)?;
    let mut conditional = 0.0;
    for (k, b) in blocks.iter().enumerate() {
        conditional += p.as_slice()[k] * block_entropy(b, raw[k])?;
    }

    // (iv) feedback U^(3) = Σ_k |k⟩⟨k| ⊗ U^k
    let mut u3 = ComplexMatrix::zeros(d_m * sr, d_m * sr);
    for (k, u) in prot.feedback.iter().enumerate() {
        for i in 0..sr {
            for j in 0..sr {
                u3[(k * sr + i, k * sr + j)] = u[(i, j)];
            }
        }
    }
    let rho_f = conjugate(&rho_2, &u3, tol)?;
    let rho_m_f = partial_trace(&rho_f, (d_m, sr), Keep::A)?;
    let rho_sr_f = partial_trace(&rho_f, (d_m, sr), Keep::B)?;
    let s_m_f = von_neumann_entropy(&rho_m_f)?;
    let s_sr_f = von_neumann_entropy(&rho_sr_f)?;

    // energetics
    let (e_s_i, e_r_i) = sr_energies(&ComplexMatrix::diagonal_from(&gibbs), &r.h_s_i, &r.h_r);
    let (e_s_f, e_r_f) = sr_energies(rho_sr_f.matrix(), &r.h_s_f, &r.h_r);
    let delta_e_s = e_s_f - e_s_i;
    let q_s = e_r_i - e_r_f;
    let w_ext = -delta_e_s + q_s;
    let (_, ln_z_i) = gibbs_weights(&r.h_s_i, r.beta);
    let (_, ln_z_f) = gibbs_weights(&r.h_s_f, r.beta);
    let kt = cfg.k_b * cfg.temperature;
    let delta_f_s = -kt * (ln_z_f - ln_z_i);

    // memory entropy split in the measurement basis
    let delta_sc = cfg.k_b * (entropy_of_weights(p.as_slice()) - entropy_of_weights(&memory.populations()));
    let delta_cr = relative_entropy_of_coherence(memory)? - relative_entropy_of_coherence(&rho_m_f)?;
    let delta_s = s_m_f - s_m_i;
    let delta_s_sr = s_sr_f - s_sr_i;
    let bound_rhs = -delta_f_s + cfg.temperature * delta_sc + kt * delta_cr;
    let slack = bound_rhs - w_ext;

    // Klein: Tr ρ ln ρ − Tr ρ ln σ_can ≥ 0, with σ_can = Gibbs(H_S^f) ⊗ Gibbs(H_R)
    let ln_gs = log_gibbs_weights(&r.h_s_f, r.beta);
    let ln_gr = log_gibbs_weights(&r.h_r, r.beta);
    let mut cross = 0.0;
    let mut outside = 0.0;
    for (s, a) in ln_gs.iter().enumerate() {
        for (q, b) in ln_gr.iter().enumerate() {
            let i = s * r.d_r + q;
            let w = rho_sr_f.matrix()[(i, i)].re;
            if (a + b).exp() > SUPPORT_FLOOR {
                cross += w * (a + b);
            } else {
                outside += w;
            }
        }
    }
    let klein_skipped = outside > SUPPORT_LEAK;

    let check = |name, residual, threshold| ChainCheck { name, residual, threshold, skipped: false };
    let chain_checks = vec![
        check("measurement", s_m_2 + conditional - (s_sr_i + s_m_i), slack_tol),
        check("subadditivity", s_sr_2 - conditional, slack_tol),
        check("concavity", s_sr_f - conditional, slack_tol),
        check("memory_equality", -(s_m_f - s_m_2).abs(), MEMORY_EQUALITY_TOL),
        ChainCheck {
            name: "klein",
            residual: if klein_skipped { f64::NAN } else { -s_sr_f - cross },
            threshold: slack_tol,
            skipped: klein_skipped,
        },
        check("entropy_increase", delta_s_sr + delta_s, slack_tol),
        check("bound", slack, slack_tol),
    ];

    Ok(IheTrialReport {
        p_k: p,
        w_ext,
        delta_e_s,
        q_s,
        delta_f_s,
        delta_s,
        delta_s_sr,
        delta_sc,
        delta_cr,
        bound_rhs,
        slack,
        chain_checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainMinimum {
    pub name: &'static str,
    /// Smallest residual over the trials where the check was evaluated.
    pub min_residual: f64,
    pub skipped: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearSaturation {
    pub trial: u64,
    pub slack: f64,
    pub w_ext: f64,
    pub bound_rhs: f64,
    pub protocol: ProtocolDump,
}

/// Protocols with `|ΔS_c| < 1e−6`, tested against `W_ext ≤ k_B T ΔC_r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherentWorkFilter {
    pub members: u64,
    /// Largest `W_ext − k_B T ΔC_r` among members (−∞ when empty).
    pub max_excess: f64,
}

pub const ZERO_SC_FILTER: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzSummary {
    pub trials: u64,
    pub seed: u64,
    pub min_slack: f64,
    pub min_slack_trial: u64,
    pub min_slack_report: IheTrialReport,
    pub min_slack_protocol: ProtocolDump,
    pub min_chain_residuals: Vec<ChainMinimum>,
    pub max_w_ext: f64,
    pub coherent_work: CoherentWorkFilter,
    /// Number of trials meeting the near-saturation test (only the first
    /// `near_saturation_cap` are stored).
    pub near_saturation_count: u64,
    pub near_saturation_protocols: Vec<NearSaturation>,
}

fn is_near_saturated(r: &IheTrialReport) -> bool {
    r.slack < 1e-3 * (r.w_ext.abs() + r.bound_rhs.abs() + 1.0)
}

/// Runs `cfg.trials` sampled protocols in parallel. Trial `t` draws from
/// [`trial_rng`]`(seed, t)`, so the summary does not depend on scheduling.
/// Any violated check is an error.
pub fn fuzz(cfg: &IheConfig) -> Result<FuzzSummary> {
    let r = cfg.resolve()?;
    let reports: Vec<IheTrialReport> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let prot = sample_protocol(cfg, &mut trial_rng(cfg.seed, t));
            run_resolved(cfg, &r, &prot)
        })
        .collect::<Result<_>>()?;

    for (t, rep) in reports.iter().enumerate() {
        if let Some(c) = rep.failed_check() {
            return Err(IheError::BoundViolated { trial: t as u64, check: c.name, residual: c.residual });
        }
    }

    let regenerate = |t: u64| sample_protocol(cfg, &mut trial_rng(cfg.seed, t)).dump();
    let mut min_t = 0;
    let mut mins: Vec<ChainMinimum> = CHECK_NAMES
        .iter()
        .map(|&name| ChainMinimum { name, min_residual: f64::INFINITY, skipped: 0 })
        .collect();
    let mut coherent_work = CoherentWorkFilter { members: 0, max_excess: f64::NEG_INFINITY };
    let mut max_w_ext = f64::NEG_INFINITY;
    let mut near = Vec::new();
    let mut near_count = 0;
    for (t, rep) in reports.iter().enumerate() {
        if rep.slack < reports[min_t].slack {
            min_t = t;
        }
        for (m, c) in mins.iter_mut().zip(&rep.chain_checks) {
            if c.skipped {
                m.skipped += 1;
            } else {
                m.min_residual = m.min_residual.min(c.residual);
            }
        }
        max_w_ext = max_w_ext.max(rep.w_ext);
        if rep.delta_sc.abs() < ZERO_SC_FILTER {
            coherent_work.members += 1;
            let excess = rep.w_ext - cfg.k_b * cfg.temperature * rep.delta_cr;
            coherent_work.max_excess = coherent_work.max_excess.max(excess);
        }
        if is_near_saturated(rep) {
            near_count += 1;
            if near.len() < cfg.near_saturation_cap {
                near.push(NearSaturation {
                    trial: t as u64,
                    slack: rep.slack,
                    w_ext: rep.w_ext,
                    bound_rhs: rep.bound_rhs,
                    protocol: regenerate(t as u64),
                });
            }
        }
    }
    let worst = &reports[min_t];
    Ok(FuzzSummary {
        trials: cfg.trials,
        seed: cfg.seed,
        min_slack: worst.slack,
        min_slack_trial: min_t as u64,
        min_slack_report: worst.clone(),
        min_slack_protocol: regenerate(min_t as u64),
        min_chain_residuals: mins,
        max_w_ext,
        coherent_work,
        near_saturation_count: near_count,
        near_saturation_protocols: near,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus_memory() -> MatrixParts {
        MatrixParts { re: vec![vec![0.5, 0.5], vec![0.5, 0.5]], im: None }
    }

    #[test]
    fn gibbs_two_level() {
        let (w, ln_z) = gibbs_weights(&[0.0, 1.0], 1.0);
        let e = (-1.0f64).exp();
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((ln_z - (1.0 + e).ln()).abs() < 1e-15);
        let (w, _) = gibbs_weights(&[0.3, 0.3, 0.3], 0.01);
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let (w, _) = gibbs_weights(&[0.0, 2.0], 1e-12);
        assert!((w[0] - 0.5).abs() < 1e-11);
    }

    #[test]
    fn initial_state_is_product() {
        let cfg = IheConfig { h_s_initial: Some(vec![0.0, 1.0]), ..IheConfig::default() };
        let rho = build_initial(&cfg).unwrap();
        assert_eq!(rho.dim(), 8);
        let s = partial_trace(&partial_trace(&rho, (2, 4), Keep::B).unwrap(), (2, 2), Keep::A).unwrap();
        let e = (-1.0f64).exp();
        assert!((s.populations()[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn idle_protocol() {
        let cfg = IheConfig { h_s_final: Some(vec![0.0, 2.0]), ..IheConfig::default() };
        let rep = run_protocol(&cfg, &IheProtocol::idle(&cfg)).unwrap();
        assert_eq!(rep.delta_cr, 0.0);
        assert!(rep.delta_s.abs() < 1e-14);
        assert!(rep.delta_sc.abs() < 1e-15);
        // ΔE_S counts the quench; no heat flows from R
        assert!(rep.q_s.abs() < 1e-15);
        let (w, _) = gibbs_weights(&[0.0, 1.0], 1.0);
        assert!((rep.w_ext + w[1]).abs() < 1e-14);
        let df = -(1.0 + (-2.0f64).exp()).ln() + (1.0 + (-1.0f64).exp()).ln();
        assert!((rep.delta_f_s - df).abs() < 1e-14);
        assert!(rep.failed_check().is_none(), "{:?}", rep.chain_checks);
    }

    #[test]
    fn plus_memory_is_dephased() {
        let cfg = IheConfig { memory_initial: Some(plus_memory()), ..IheConfig::default() };
        let rep = run_protocol(&cfg, &IheProtocol::idle(&cfg)).unwrap();
        let ln2 = 2f64.ln();
        assert!((rep.delta_cr - ln2).abs() < 1e-12);
        assert!(rep.delta_sc.abs() < 1e-15);
        assert!(rep.w_ext.abs() < 1e-15);
        assert!((rep.bound_rhs - ln2).abs() < 1e-12);
        assert!((rep.delta_s - ln2).abs() < 1e-12);
        assert!(rep.failed_check().is_none());
    }

    #[test]
    fn haar_protocol_seed_7() {
        let cfg = IheConfig { h_s_final: Some(vec![0.2, 1.4]), ..IheConfig::default() };
        let prot = sample_protocol(&cfg, &mut trial_rng(7, 0));
        let rep = run_protocol(&cfg, &prot).unwrap();
        for c in &rep.chain_checks {
            assert!(c.residual >= -1e-9, "{c:?}");
        }
        assert!((rep.p_k.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((rep.slack - (rep.bound_rhs - rep.w_ext)).abs() < 1e-15);
    }

    #[test]
    fn single_trial_summary_matches_run() {
        let cfg = IheConfig { trials: 1, seed: 11, random_memory: true, ..IheConfig::default() };
        let summary = fuzz(&cfg).unwrap();
        let rep = run_protocol(&cfg, &sample_protocol(&cfg, &mut trial_rng(11, 0))).unwrap();
        assert_eq!(summary.min_slack, rep.slack);
        assert_eq!(summary.min_slack_report, rep);
        for (m, c) in summary.min_chain_residuals.iter().zip(&rep.chain_checks) {
            assert_eq!(m.min_residual, c.residual);
        }
    }

    #[test]
    fn fuzz_is_deterministic() {
        let cfg = IheConfig { trials: 64, seed: 3, d_r: 4, ..IheConfig::default() };
        assert_eq!(fuzz(&cfg).unwrap(), fuzz(&cfg).unwrap());
    }

    #[test]
    fn diagonal_preserving_keeps_populations() {
        let cfg = IheConfig {
            memory_initial: Some(MatrixParts { re: vec![vec![0.7, 0.3], vec![0.3, 0.3]], im: None }),
            sampler: Sampler::DiagonalPreserving,
            ..IheConfig::default()
        };
        let rep = run_protocol(&cfg, &sample_protocol(&cfg, &mut trial_rng(5, 2))).unwrap();
        assert!(rep.delta_sc.abs() < 1e-12);
        assert!((rep.p_k.as_slice()[0] - 0.7).abs() < 1e-12);
        assert!(rep.w_ext <= rep.delta_cr + 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        let too_big = IheConfig { d_m: 4, d_s: 4, d_r: 8, ..IheConfig::default() };
        assert!(matches!(too_big.validate(), Err(IheError::InvalidConfig { field: "d_m", .. })));
        let spectrum = IheConfig { h_r: Some(vec![0.0]), ..IheConfig::default() };
        assert!(matches!(spectrum.validate(), Err(IheError::InvalidConfig { field: "h_r", .. })));
        let cold = IheConfig { temperature: 0.0, ..IheConfig::default() };
        assert!(cold.validate().is_err());
        let cfg = IheConfig::default();
        let mut prot = IheProtocol::idle(&cfg);
        prot.u1_sr[(0, 0)] = Complex64::new(1.1, 0.0);
        assert!(matches!(run_protocol(&cfg, &prot), Err(IheError::Matrix(MatrixError::NotUnitary { .. }))));
        prot.u1_sr = ComplexMatrix::identity(3);
        assert!(matches!(run_protocol(&cfg, &prot), Err(IheError::Matrix(MatrixError::DimensionMismatch { .. }))));
    }
}
