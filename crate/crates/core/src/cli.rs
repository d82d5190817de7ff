//! Run configuration, output schemas and the `simulate` / `sweep` / `fit`
//! commands.
//!
//! Configurations are TOML with unknown keys rejected. Every table is
//! required except `threshold`, which defaults to 1e-6.
//!
//! ```toml
//! cutoffs = [4, 4]
//! output_path = "witness.csv"
//!
//! [model]
//! omega = 1.0
//! u = -0.01
//! g = 0.1
//! kappa = 1.0
//!
//! [initial_state]
//! kind = "fock"
//! n_a = 1
//! n_b = 0
//!
//! [evolution]
//! dt = 0.001
//! t_max = 50.0
//! sample_stride = 10
//! ```

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    detect_periods, fit_period_law_points, kappa_grid, sweep_kappa, FitCoefficients, PeriodEstimate, Spacing,
    SweepResult, SweepSetup, WitnessId, DEFAULT_THRESHOLD,
};
use crate::dynamics::EvolutionConfig;
use crate::model::{InitialState, ModelParams, TwoModeSpace};
use crate::witnesses::WitnessTrace;

pub const WITNESS_HEADER: &str = "t,zeta_ab,zeta_ba,n_a,n_b,raw_trace";
pub const SWEEP_HEADER: &str = "kappa,T_ba,T_ab";
pub const PREDICT_HEADER: &str = "kappa,T_ba_pred";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(#[from] crate::Error),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_output() -> String {
    "witness.csv".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cutoffs: [usize; 2],
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_output")]
    pub output_path: String,
    pub model: ModelParams,
    pub initial_state: InitialState,
    pub evolution: EvolutionConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: crate::Error| CliError::Config(e.to_string());
        self.model.validate().map_err(bad)?;
        self.evolution.validate().map_err(bad)?;
        let space = self.space().map_err(bad)?;
        // surfaces out-of-range Fock indices and the coherent leakage guard
        self.initial_state.prepare(space).map_err(bad)?;
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(CliError::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }

    pub fn space(&self) -> crate::Result<TwoModeSpace> {
        TwoModeSpace::new(self.cutoffs[0], self.cutoffs[1])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes to TOML")
    }

    /// SHA-256 of the canonical re-serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Fixed-width scientific notation with 16 significant digits.
pub fn format_number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.15e}")
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// `out.csv` -> `out.<suffix>`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn witness_csv(trace: &WitnessTrace) -> String {
    let mut out = String::with_capacity(128 * (trace.samples.len() + 1));
    out.push_str(WITNESS_HEADER);
    out.push('\n');
    for s in &trace.samples {
        let fields = [s.t, s.zeta_ab, s.zeta_ba, s.n_a, s.n_b, s.raw_trace_magnitude].map(format_number);
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in &sweep.rows {
        let _ = writeln!(out, "{},{},{}", format_number(r.kappa), opt(r.t_ba), opt(r.t_ab));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Periods {
    pub ab: Vec<PeriodEstimate>,
    pub ba: Vec<PeriodEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakWitness {
    pub ab: f64,
    pub ba: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub software_version: String,
    pub config_digest: String,
    pub config: RunConfig,
    pub initial_state: String,
    pub samples: usize,
    pub periods: Periods,
    pub peak_witness: PeakWitness,
    pub wall_clock_seconds: f64,
    pub csv_path: String,
}

fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes to JSON");
    s.push('\n');
    s
}

pub fn cmd_simulate(config_path: &Path, out: Option<&Path>) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let cfg = RunConfig::load(config_path)?;
    let space = cfg.space().map_err(|e| CliError::Config(e.to_string()))?;
    let trace = WitnessTrace::simulate(cfg.model, space, cfg.initial_state, &cfg.evolution)?;

    let periods = Periods {
        ab: detect_periods(&trace, WitnessId::Ab, cfg.threshold)?,
        ba: detect_periods(&trace, WitnessId::Ba, cfg.threshold)?,
    };
    let peak =
        |f: fn(&crate::witnesses::WitnessSample) -> f64| trace.samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let peak_witness = PeakWitness { ab: peak(|s| s.zeta_ab), ba: peak(|s| s.zeta_ba) };

    let csv_path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output_path));
    write_atomic(&csv_path, witness_csv(&trace).as_bytes())?;

    let summary = RunSummary {
        software_version: version(),
        config_digest: cfg.digest(),
        initial_state: cfg.initial_state.to_string(),
        samples: trace.samples.len(),
        periods,
        peak_witness,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        csv_path: csv_path.display().to_string(),
        config: cfg,
    };
    write_atomic(&sibling_path(&csv_path, "summary.json"), to_json(&summary).as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub software_version: String,
    pub config_digest: String,
    pub spacing: String,
    pub rows: SweepResult,
    pub wall_clock_seconds: f64,
    pub csv_path: String,
}

pub struct SweepArgs<'a> {
    pub config_path: &'a Path,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub points: usize,
    pub linear: bool,
    pub out: Option<&'a Path>,
}

pub fn cmd_sweep(args: &SweepArgs<'_>) -> Result<SweepSummary, CliError> {
    let started = Instant::now();
    let spacing = if args.linear { Spacing::Linear } else { Spacing::Geometric };
    let kappas =
        kappa_grid(args.kappa_min, args.kappa_max, args.points, spacing).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = RunConfig::load(args.config_path)?;
    let setup = SweepSetup {
        space: cfg.space().map_err(|e| CliError::Config(e.to_string()))?,
        initial: cfg.initial_state,
        evolution: cfg.evolution,
        threshold: cfg.threshold,
    };
    let sweep = sweep_kappa(&cfg.model, &kappas, &setup)?;

    let csv_path = args.out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output_path));
    write_atomic(&csv_path, sweep_csv(&sweep).as_bytes())?;
    let summary = SweepSummary {
        software_version: version(),
        config_digest: cfg.digest(),
        spacing: format!("{spacing:?}").to_lowercase(),
        rows: sweep,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        csv_path: csv_path.display().to_string(),
    };
    write_atomic(&sibling_path(&csv_path, "summary.json"), to_json(&summary).as_bytes())?;
    Ok(summary)
}

/// One sweep CSV row: `(kappa, T_ba, T_ab)`.
pub type SweepCsvRow = (f64, Option<f64>, Option<f64>);

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepCsvRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::Config(format!("malformed CSV: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
        return Err(CliError::Config(format!("malformed CSV: expected header `{SWEEP_HEADER}`")));
    }
    let field = |raw: &str, line: usize| -> Result<Option<f64>, CliError> {
        if raw.trim().is_empty() {
            return Ok(None);
        }
        raw.trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("malformed CSV: line {line}: cannot parse `{raw}`")))
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Config(format!("malformed CSV: {e}")))?;
        let kappa = field(&record[0], line)?
            .ok_or_else(|| CliError::Config(format!("malformed CSV: line {line}: missing kappa")))?;
        rows.push((kappa, field(&record[1], line)?, field(&record[2], line)?));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub software_version: String,
    pub source: String,
    pub fit: FitCoefficients,
}

pub fn cmd_fit(input: &Path, predict: Option<&Path>, out: Option<&Path>) -> Result<FitReport, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let rows = parse_sweep_csv(&text)?;
    let (kappas, periods): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|&(k, t, _)| t.map(|t| (k, t))).unzip();
    let fit = fit_period_law_points(&kappas, &periods).map_err(|e| match e {
        crate::Error::InsufficientData(msg) => CliError::Config(format!("insufficient data: {msg}")),
        other => CliError::Numeric(other),
    })?;

    let report = FitReport { software_version: version(), source: input.display().to_string(), fit };
    let report_path = out.map(Path::to_path_buf).unwrap_or_else(|| sibling_path(input, "fit.json"));
    write_atomic(&report_path, to_json(&report).as_bytes())?;

    if let Some(path) = predict {
        let lo = kappas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid = kappa_grid(lo, hi, 200, Spacing::Geometric)?;
        let mut csv = String::from(PREDICT_HEADER);
        csv.push('\n');
        for k in grid {
            let _ = writeln!(csv, "{},{}", format_number(k), format_number(fit.predict(k)));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(report)
}
