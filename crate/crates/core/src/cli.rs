//! The `qse` command line: `cycle`, `sweep`, `critical`, `ihe` and `path`.
//!
//! Configuration is a strict JSON file (unknown keys are rejected); the
//! flags override it. Results go to `--out` or stdout. Failures print one
//! JSON line on stderr and exit with 2 (configuration) or 3 (numerical).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ihe::{fuzz, IheConfig, IheError};
use crate::matrixcore::{DensityMatrix, MatrixError, MatrixParts};
use crate::pathtools::{path_report, PathError, PathNode, PathSchedule};
use crate::szilard::{
    critical_probability, cycle_report, cycle_report_at, insertion_probabilities, oracle_run_cycle, thermal_demon,
    zero_work_probability, CycleReport, DemonState, SzilardError, WellConfig,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Sweep CSV header; the column set and order are fixed.
pub const SWEEP_COLUMNS: &str = "p_r,factor,eta,eta_carnot,w_tot,q_tot,q_coh,delta_cr,delta_sc,de_tot";

#[derive(Debug, Parser)]
#[command(name = "qse", version, about = "Coherence-assisted quantum Szilard engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One cycle of the engine as JSON.
    Cycle,
    /// Efficiency curves over a P_R grid as CSV.
    Sweep,
    /// Critical and zero-work probabilities as JSON.
    Critical,
    /// Fuzz the information-engine bound with random protocols.
    Ihe,
    /// First-law accounting of a schedule file.
    Path,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cross-check the cycle against the truncated density-matrix oracle.
    #[arg(long, global = true)]
    pub oracle: bool,
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    #[arg(long = "tail-eps", global = true)]
    pub tail_eps: Option<f64>,
    /// `START:STOP:STEP`, inclusive of STOP.
    #[arg(long = "pr-grid", global = true)]
    pub pr_grid: Option<String>,
    /// Comma-separated coherence factors.
    #[arg(long, global = true, value_delimiter = ',')]
    pub factors: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Schedule file for `path`.
    #[arg(long, global = true)]
    pub schedule: Option<PathBuf>,
}

/// Demon parameters: a thermal demon with coherence `factor · sqrt(p_g p_e)`
/// and phase, unless `state` is given outright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemonSpec {
    pub coherence_factor: f64,
    pub phase: f64,
    pub state: Option<DemonState>,
}

impl Default for DemonSpec {
    fn default() -> Self {
        Self { coherence_factor: 0.0, phase: 0.0, state: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    /// Points `start + i·step` up to `stop`, snapped to 12 decimals so that
    /// e.g. `0.07` is not printed as `0.06999999999999999`.
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let Grid { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
            return Err(CliError::config("InvalidGrid", format!("bad grid {start}:{stop}:{step}")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(CliError::config("InvalidGrid", format!("grid has {n} points")));
        }
        Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
    }
}

impl std::str::FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::config("InvalidGrid", format!("expected START:STOP:STEP, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        Ok(Grid { start: v[0], stop: v[1], step: v[2] })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub factors: Vec<f64>,
    pub p_r_grid: Option<Grid>,
    /// Explicit `P_R` values; takes precedence over `p_r_grid`.
    pub p_r_values: Option<Vec<f64>>,
    /// Insertion positions; `P_R` then follows from the partition sums.
    pub l_grid: Option<Grid>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { factors: vec![0.0, 0.7, 1.0], p_r_grid: None, p_r_values: None, l_grid: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub well: WellConfig,
    pub demon: DemonSpec,
    /// Evaluate `cycle` at this `P_R` instead of the well's insertion point.
    pub p_r: Option<f64>,
    pub sweep: SweepSpec,
    pub ihe: IheConfig,
    pub schedule: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Overrides `ihe.seed`.
    pub seed: Option<u64>,
    pub oracle: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("ConfigParse", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("ConfigRead", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, flags: &Flags) -> Result<(), CliError> {
        if let Some(out) = &flags.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = flags.seed.or(self.seed) {
            self.ihe.seed = seed;
        }
        if flags.oracle {
            self.oracle = true;
        }
        if let Some(n) = flags.nmax {
            self.well.n_max = n;
        }
        if let Some(e) = flags.tail_eps {
            self.well.tail_eps = e;
        }
        if let Some(g) = &flags.pr_grid {
            self.sweep.p_r_grid = Some(g.parse()?);
            self.sweep.p_r_values = None;
        }
        if let Some(f) = &flags.factors {
            self.sweep.factors = f.clone();
        }
        if let Some(t) = flags.trials {
            self.ihe.trials = t;
        }
        if let Some(s) = &flags.schedule {
            self.schedule = Some(s.clone());
        }
        Ok(())
    }
}

/// A failure with its exit code and a short machine-readable kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, kind, message: message.into() }
    }

    pub fn numerical(kind: &'static str, message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_NUMERICAL, kind, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "exit_code": self.exit_code, "message": self.message }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

fn matrix_kind(e: &MatrixError) -> &'static str {
    match e {
        MatrixError::NotSquare { .. } => "NotSquare",
        MatrixError::NotHermitian { .. } => "NotHermitian",
        MatrixError::TraceNotOne { .. } => "TraceNotOne",
        MatrixError::NotPositive { .. } => "NotPositive",
        MatrixError::DimensionMismatch { .. } => "DimensionMismatch",
        MatrixError::NotUnitary { .. } => "NotUnitary",
        MatrixError::NoConvergence { .. } => "NoConvergence",
        MatrixError::InvalidSimplex { .. } => "InvalidSimplex",
        MatrixError::NonFinite => "NonFinite",
        MatrixError::InvalidTolerance { .. } => "InvalidTolerance",
    }
}

fn szilard_kind(e: &SzilardError) -> &'static str {
    match e {
        SzilardError::InvalidConfig { .. } => "InvalidConfig",
        SzilardError::InvalidDemon(_) => "InvalidDemon",
        SzilardError::TruncationInsufficient { .. } => "TruncationInsufficient",
        SzilardError::DegenerateCycle { .. } => "DegenerateCycle",
        SzilardError::NoSignChange { .. } => "NoSignChange",
        SzilardError::Matrix(m) => matrix_kind(m),
    }
}

/// Errors raised while validating inputs.
fn invalid_szilard(e: SzilardError) -> CliError {
    CliError::config(szilard_kind(&e), e.to_string())
}

/// Errors raised while computing.
fn failed_szilard(e: SzilardError) -> CliError {
    match e {
        SzilardError::InvalidConfig { .. } | SzilardError::InvalidDemon(_) => invalid_szilard(e),
        _ => CliError::numerical(szilard_kind(&e), e.to_string()),
    }
}

fn ihe_error(e: IheError, exit_code: i32) -> CliError {
    let kind = match &e {
        IheError::InvalidConfig { .. } => "InvalidConfig",
        IheError::BoundViolated { .. } => "BoundViolated",
        IheError::Matrix(m) => matrix_kind(m),
    };
    CliError { exit_code, kind, message: e.to_string() }
}

fn path_error(e: PathError, exit_code: i32) -> CliError {
    let kind = match &e {
        PathError::TooShort(_) => "TooShort",
        PathError::DimensionMismatch { .. } => "DimensionMismatch",
        PathError::InvalidNode { .. } => "InvalidNode",
        PathError::EndpointDiagonalMismatch { .. } => "EndpointDiagonalMismatch",
        PathError::InvalidTemperature(_) => "InvalidTemperature",
        PathError::Matrix(m) => matrix_kind(m),
    };
    CliError { exit_code, kind, message: e.to_string() }
}

fn validated_well(cfg: &RunConfig) -> Result<WellConfig, CliError> {
    cfg.well.validate().map_err(invalid_szilard)?;
    Ok(cfg.well.clone())
}

fn demon_for(well: &WellConfig, spec: &DemonSpec, factor: f64) -> Result<DemonState, CliError> {
    match spec.state {
        Some(s) => DemonState::new(s.p_g, s.f, &well.tolerances).map_err(invalid_szilard),
        None => thermal_demon(well, factor, spec.phase).map_err(invalid_szilard),
    }
}

fn to_json_string<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn cmd_cycle(cfg: &RunConfig) -> Result<String, CliError> {
    let well = validated_well(cfg)?;
    let demon = demon_for(&well, &cfg.demon, cfg.demon.coherence_factor)?;
    let report: CycleReport = match cfg.p_r {
        Some(p_r) => {
            if !(0.0..=1.0).contains(&p_r) {
                return Err(CliError::config("InvalidConfig", format!("p_r = {p_r} outside [0, 1]")));
            }
            if cfg.oracle {
                return Err(CliError::config("InvalidConfig", "the oracle runs at the well's insertion point; drop p_r"));
            }
            cycle_report_at(&well, &demon, p_r)
        }
        None => cycle_report(&well, &demon).map_err(failed_szilard)?,
    };
    report.efficiency().map_err(failed_szilard)?;
    let mut out = serde_json::to_value(&report).expect("serializable");
    if cfg.oracle {
        let run = oracle_run_cycle(&well, &demon, None).map_err(failed_szilard)?;
        let obj = out.as_object_mut().expect("object");
        obj.insert("oracle_max_abs_diff".into(), json!(run.max_abs_diff));
        obj.insert(
            "oracle".into(),
            json!({
                "worst_field": run.worst_field,
                "demon_final_diff": run.demon_final_diff,
                "unitarity_deviation": run.unitarity_deviation,
                "q_tot_full_state": run.q_tot_full_state,
                "l_g": run.l_g,
                "l_e": run.l_e,
            }),
        );
    }
    Ok(to_json_string(&out))
}

fn csv_float(x: f64) -> String {
    // Debug is the shortest string that parses back to the same f64
    format!("{x:?}")
}

/// One sweep point: `P_R` and, for an `l` grid, the configuration it came from.
fn sweep_points(cfg: &RunConfig, well: &WellConfig) -> Result<Vec<f64>, CliError> {
    let s = &cfg.sweep;
    if let Some(v) = &s.p_r_values {
        return Ok(v.clone());
    }
    if let Some(g) = &s.p_r_grid {
        return g.points();
    }
    if let Some(g) = &s.l_grid {
        return g
            .points()?
            .into_iter()
            .map(|l| {
                let w = WellConfig { insertion: l, ..well.clone() };
                w.validate().map_err(invalid_szilard)?;
                insertion_probabilities(&w).map(|(_, p_r)| p_r).map_err(failed_szilard)
            })
            .collect();
    }
    Grid { start: 0.01, stop: 0.99, step: 0.01 }.points()
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let well = validated_well(cfg)?;
    let points = sweep_points(cfg, &well)?;
    if let Some(bad) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CliError::config("InvalidGrid", format!("P_R = {bad} outside [0, 1]")));
    }
    if cfg.sweep.factors.is_empty() {
        return Err(CliError::config("InvalidConfig", "no coherence factors"));
    }
    let demons: Vec<(f64, DemonState)> = cfg
        .sweep
        .factors
        .iter()
        .map(|&f| demon_for(&well, &cfg.demon, f).map(|d| (f, d)))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(f64, DemonState, f64)> =
        demons.iter().flat_map(|&(f, d)| points.iter().map(move |&p| (f, d, p))).collect();
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(factor, d, p_r)| {
            let r = cycle_report_at(&well, &d, p_r);
            let eta = r.eta.map(csv_float).unwrap_or_default();
            [
                csv_float(p_r),
                csv_float(factor),
                eta,
                csv_float(r.eta_carnot),
                csv_float(r.w_tot),
                csv_float(r.q_tot),
                csv_float(r.q_coh),
                csv_float(r.delta_cr),
                csv_float(r.delta_sc),
                csv_float(r.de_tot),
            ]
            .join(",")
        })
        .collect();
    let mut out = String::with_capacity(rows.len() * 160);
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    Ok(out)
}

fn root_json(r: Result<f64, SzilardError>) -> Result<(Value, Value), CliError> {
    match r {
        Ok(p) => Ok((json!(p), Value::Null)),
        Err(SzilardError::NoSignChange { what, detail }) => {
            Ok((Value::Null, json!({ "error": "NoSignChange", "what": what, "detail": detail })))
        }
        Err(e) => Err(failed_szilard(e)),
    }
}

pub fn cmd_critical(cfg: &RunConfig) -> Result<String, CliError> {
    let well = validated_well(cfg)?;
    let demon = demon_for(&well, &cfg.demon, cfg.demon.coherence_factor)?;
    let (cri, cri_reason) = root_json(critical_probability(&well, &demon))?;
    let (zero, zero_reason) = root_json(zero_work_probability(&well, &demon))?;
    Ok(to_json_string(&json!({
        "p_r_cri": cri,
        "p_r_zero": zero,
        "p_r_cri_reason": cri_reason,
        "p_r_zero_reason": zero_reason,
        "eta_carnot": well.carnot_efficiency(),
        "demon": demon,
    })))
}

pub fn cmd_ihe(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.ihe.validate().map_err(|e| ihe_error(e, EXIT_CONFIG))?;
    let summary = fuzz(&cfg.ihe).map_err(|e| ihe_error(e, EXIT_NUMERICAL))?;
    Ok(to_json_string(&summary))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    energies: Vec<f64>,
    populations: Vec<f64>,
}

/// `{"temperature", "k_b"?, "nodes": [{"energies", "populations"}],
/// "rho_initial"?: {"re", "im"}, "rho_final"?: {"re", "im"}}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    temperature: f64,
    #[serde(default)]
    k_b: Option<f64>,
    nodes: Vec<NodeFile>,
    #[serde(default)]
    rho_initial: Option<MatrixParts>,
    #[serde(default)]
    rho_final: Option<MatrixParts>,
}

pub fn parse_schedule(text: &str, tol: &crate::matrixcore::Tolerances) -> Result<PathSchedule, CliError> {
    let file: ScheduleFile =
        serde_json::from_str(text).map_err(|e| CliError::config("ScheduleParse", e.to_string()))?;
    let nodes = file
        .nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| PathNode::at(i, n.energies, n.populations, tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| path_error(e, EXIT_CONFIG))?;
    let mut schedule = PathSchedule::new(nodes, file.temperature).map_err(|e| path_error(e, EXIT_CONFIG))?;
    if let Some(k_b) = file.k_b {
        if !(k_b > 0.0 && k_b.is_finite()) {
            return Err(CliError::config("InvalidConfig", format!("k_b = {k_b} must be positive")));
        }
        schedule = schedule.with_k_b(k_b);
    }
    let density = |field: &'static str, p: &MatrixParts| -> Result<DensityMatrix, CliError> {
        p.to_matrix()
            .and_then(|m| DensityMatrix::new(m, tol))
            .map_err(|e| CliError::config(matrix_kind(&e), format!("{field}: {e}")))
    };
    match (&file.rho_initial, &file.rho_final) {
        (Some(a), Some(b)) => {
            let (a, b) = (density("rho_initial", a)?, density("rho_final", b)?);
            schedule = schedule.with_endpoints(a, b).map_err(|e| path_error(e, EXIT_CONFIG))?;
        }
        (None, None) => {}
        _ => return Err(CliError::config("ScheduleParse", "give both rho_initial and rho_final, or neither")),
    }
    Ok(schedule)
}

pub fn cmd_path(cfg: &RunConfig) -> Result<String, CliError> {
    let path = cfg.schedule.as_ref().ok_or_else(|| CliError::config("MissingSchedule", "pass --schedule PATH"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("ScheduleRead", format!("{}: {e}", path.display())))?;
    let schedule = parse_schedule(&text, &cfg.well.tolerances)?;
    let report = path_report(&schedule).map_err(|e| path_error(e, EXIT_NUMERICAL))?;
    Ok(to_json_string(&report))
}

fn execute(cli: &Cli) -> Result<(String, Option<PathBuf>), CliError> {
    let mut cfg = match &cli.flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.flags)?;
    let text = match cli.command {
        Command::Cycle => cmd_cycle(&cfg)?,
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::Critical => cmd_critical(&cfg)?,
        Command::Ihe => cmd_ihe(&cfg)?,
        Command::Path => cmd_path(&cfg)?,
    };
    Ok((text, cfg.out))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(stderr, "{}", CliError::config("Usage", first).to_json());
            return EXIT_CONFIG;
        }
    };
    let result = execute(&cli).and_then(|(text, out)| match out {
        Some(path) => {
            fs::write(&path, text).map_err(|e| CliError::config("OutputWrite", format!("{}: {e}", path.display())))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::config("OutputWrite", e.to_string())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code
        }
    }
}
