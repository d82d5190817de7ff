//! Witnessing periods, kappa sweeps and the period-law fit.

use std::ops::ControlFlow;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::EvolutionConfig;
use crate::error::{Error, Result};
use crate::model::{InitialState, ModelParams, TwoModeSpace};
use crate::witnesses::{WitnessSample, WitnessTrace};

pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Environment variable holding the sweep worker count.
pub const THREADS_ENV: &str = "SOLIPLASMON_THREADS";

/// Peaks below `NOISE_FACTOR * threshold` are not counted as excursions.
const NOISE_FACTOR: f64 = 10.0;

/// Relative depth a dip must reach between two maxima to count them as
/// separate lobes of one excursion.
const LOBE_PROMINENCE: f64 = 0.01;

/// Time a sweep run continues past the point where both first excursions
/// have dropped below threshold.
const SWEEP_TAIL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessId {
    Ab,
    Ba,
}

impl std::fmt::Display for WitnessId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WitnessId::Ab => "ab",
            WitnessId::Ba => "ba",
        })
    }
}

impl WitnessId {
    pub fn value(self, s: &WitnessSample) -> f64 {
        match self {
            WitnessId::Ab => s.zeta_ab,
            WitnessId::Ba => s.zeta_ba,
        }
    }
}

/// A maximal interval during which one witness stays positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodEstimate {
    pub witness: WitnessId,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    pub peak_value: f64,
    pub peak_time: f64,
    /// The excursion spans two or more maxima without dropping below
    /// threshold in between.
    pub merged_lobes: bool,
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let step = times[1] - times[0];
    if step.is_nan() || step <= 0.0 {
        return Err(Error::NonUniformSampling { index: 1 });
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(Error::NonUniformSampling { index: i + 1 });
        }
    }
    Ok(step)
}

fn zero_crossing(t0: f64, v0: f64, t1: f64, v1: f64) -> f64 {
    if v1 == v0 {
        return t0;
    }
    t0 + (0.0 - v0) * (t1 - t0) / (v1 - v0)
}

fn count_lobes(values: &[f64], peak: f64) -> usize {
    let tol = LOBE_PROMINENCE * peak;
    let mut lobes = 1;
    let mut high = values[0];
    let mut low = values[0];
    let mut falling = false;
    for &v in values {
        if falling {
            low = low.min(v);
            if v > low + tol {
                lobes += 1;
                falling = false;
                high = v;
            }
        } else {
            high = high.max(v);
            if v < high - tol {
                falling = true;
                low = v;
            }
        }
    }
    lobes
}

/// Positive excursions of `witness` along `samples`.
///
/// Cores are maximal runs above `threshold`. Each endpoint is then pushed out
/// through the sub-threshold band to the linearly interpolated zero crossing,
/// or to the local minimum when the witness turns around before reaching
/// zero. Excursions still open at the end of the trace are dropped.
pub fn detect_periods_in(samples: &[WitnessSample], witness: WitnessId, threshold: f64) -> Result<Vec<PeriodEstimate>> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    check_uniform(&t)?;
    let v: Vec<f64> = samples.iter().map(|s| witness.value(s)).collect();
    let n = v.len();

    let mut periods = Vec::new();
    let mut i = 0;
    while i < n {
        if v[i] <= threshold {
            i += 1;
            continue;
        }
        let first = i;
        while i < n && v[i] > threshold {
            i += 1;
        }
        let last = i - 1;
        if i == n {
            debug!("zeta_{witness} excursion starting at t = {} is still open at the end of the trace", t[first]);
            break;
        }

        let (peak_idx, peak_value) =
            (first..=last)
                .map(|k| (k, v[k]))
                .fold((first, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if peak_value < NOISE_FACTOR * threshold {
            continue;
        }

        let mut j = first;
        let t_start = loop {
            if j == 0 {
                break t[0];
            }
            let prev = j - 1;
            if v[prev] <= 0.0 {
                break zero_crossing(t[prev], v[prev], t[j], v[j]);
            }
            if v[prev] >= v[j] {
                break t[j];
            }
            j = prev;
        };
        let mut k = last;
        let t_end = loop {
            if k == n - 1 {
                break t[k];
            }
            let next = k + 1;
            if v[next] <= 0.0 {
                break zero_crossing(t[k], v[k], t[next], v[next]);
            }
            if v[next] >= v[k] {
                break t[k];
            }
            k = next;
        };

        periods.push(PeriodEstimate {
            witness,
            t_start,
            t_end,
            duration: t_end - t_start,
            peak_value,
            peak_time: t[peak_idx],
            merged_lobes: count_lobes(&v[first..=last], peak_value) > 1,
        });
    }
    Ok(periods)
}

pub fn detect_periods(trace: &WitnessTrace, witness: WitnessId, threshold: f64) -> Result<Vec<PeriodEstimate>> {
    detect_periods_in(&trace.samples, witness, threshold)
}

/// Tracks whether a witness has completed one excursion, sample by sample.
#[derive(Debug, Clone, Copy, Default)]
struct ExcursionWatch {
    peak: f64,
    inside: bool,
    closed: bool,
}

impl ExcursionWatch {
    fn update(&mut self, value: f64, threshold: f64) {
        if self.closed {
            return;
        }
        if value > threshold {
            self.inside = true;
            self.peak = self.peak.max(value);
        } else if self.inside {
            if self.peak >= NOISE_FACTOR * threshold {
                self.closed = true;
            }
            self.inside = false;
            self.peak = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSetup {
    pub space: TwoModeSpace,
    pub initial: InitialState,
    pub evolution: EvolutionConfig,
    pub threshold: f64,
}

impl Default for SweepSetup {
    fn default() -> Self {
        Self {
            space: TwoModeSpace::new(4, 4).expect("valid default cutoffs"),
            initial: InitialState::Fock { n_a: 1, n_b: 0 },
            evolution: EvolutionConfig { t_max: 100.0, ..Default::default() },
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa: f64,
    #[serde(rename = "T_ba")]
    pub t_ba: Option<f64>,
    #[serde(rename = "T_ab")]
    pub t_ab: Option<f64>,
    /// Simulated window for this kappa.
    pub t_window: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Geometric,
    Linear,
}

pub fn kappa_grid(kappa_min: f64, kappa_max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if !(kappa_min.is_finite() && kappa_max.is_finite() && kappa_min > 0.0 && kappa_min < kappa_max) {
        return Err(Error::InvalidArgument(format!("need 0 < kappa_min < kappa_max, got [{kappa_min}, {kappa_max}]")));
    }
    if points < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 grid points, got {points}")));
    }
    let last = (points - 1) as f64;
    let grid = (0..points)
        .map(|k| {
            let f = k as f64 / last;
            match spacing {
                Spacing::Geometric => kappa_min * (kappa_max / kappa_min).powf(f),
                Spacing::Linear => kappa_min + (kappa_max - kappa_min) * f,
            }
        })
        .collect::<Vec<_>>();
    let mut grid = grid;
    // pin the endpoints exactly
    grid[0] = kappa_min;
    grid[points - 1] = kappa_max;
    Ok(grid)
}

/// Worker pool sized by [`THREADS_ENV`], defaulting to available parallelism.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads =
        match std::env::var(THREADS_ENV) {
            Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))
            })?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))
}

fn sweep_one(base: &ModelParams, kappa: f64, setup: &SweepSetup) -> SweepRow {
    let t_window = setup.evolution.t_max.max(20.0 / kappa);
    let cfg = EvolutionConfig { t_max: t_window, ..setup.evolution };
    let mut row = SweepRow { kappa, t_ba: None, t_ab: None, t_window, diagnostics: Vec::new() };

    let threshold = setup.threshold;
    let (mut watch_ab, mut watch_ba) = (ExcursionWatch::default(), ExcursionWatch::default());
    let mut stop_at = f64::INFINITY;
    let run = WitnessTrace::simulate_until(base.with_kappa(kappa), setup.space, setup.initial, &cfg, |s| {
        watch_ab.update(s.zeta_ab, threshold);
        watch_ba.update(s.zeta_ba, threshold);
        if stop_at.is_infinite() && watch_ab.closed && watch_ba.closed {
            stop_at = s.t + SWEEP_TAIL;
        }
        if s.t >= stop_at {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let trace = match run {
        Ok((trace, _)) => trace,
        Err(e) => {
            warn!("kappa = {kappa}: simulation failed: {e}");
            row.diagnostics.push(format!("simulation failed: {e}"));
            return row;
        }
    };

    for (witness, slot) in [(WitnessId::Ba, &mut row.t_ba), (WitnessId::Ab, &mut row.t_ab)] {
        match detect_periods(&trace, witness, threshold) {
            Ok(periods) => match periods.first() {
                Some(p) => *slot = Some(p.duration),
                None => row.diagnostics.push(format!("no complete zeta_{witness} excursion within t_max = {t_window}")),
            },
            Err(e) => row.diagnostics.push(format!("period detection failed for zeta_{witness}: {e}")),
        }
    }
    if row.t_ba.is_none() {
        warn!("kappa = {kappa}: T_ba absent ({})", row.diagnostics.join("; "));
    }
    row
}

/// Runs the initial state of `setup` for every kappa and records the first
/// `T_ba` and `T_ab`. Each run's window is `max(t_max, 20 / kappa)`.
pub fn sweep_kappa(base: &ModelParams, kappas: &[f64], setup: &SweepSetup) -> Result<SweepResult> {
    base.with_kappa(1.0).validate()?;
    setup.evolution.validate()?;
    if kappas.is_empty() {
        return Err(Error::InvalidArgument("empty kappa list".into()));
    }
    if let Some(bad) = kappas.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {bad}")));
    }
    if kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("kappas must be strictly increasing".into()));
    }
    let pool = worker_pool()?;
    let rows = pool.install(|| kappas.par_iter().map(|&k| sweep_one(base, k, setup)).collect());
    Ok(SweepResult { rows })
}

/// Ordinary least-squares fit on arbitrary basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    pub rms_residual: f64,
    /// Reciprocal condition number of the column-scaled Gram matrix.
    pub rcond: f64,
}

/// Rank-deficiency cut-off on the scaled Gram matrix.
const MIN_RCOND: f64 = 1e-13;

pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[fn(f64) -> f64]) -> Result<LinearFit> {
    let (n, p) = (xs.len(), basis.len());
    if ys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: ys.len() });
    }
    if p == 0 || n < p {
        return Err(Error::InsufficientData(format!("{n} points for {p} basis functions")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite data in fit".into()));
    }

    let design = DMatrix::from_fn(n, p, |i, j| basis[j](xs[i]));
    let scales: Vec<f64> = (0..p).map(|j| design.column(j).norm()).collect();
    if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::RankDeficient { rcond: 0.0 });
    }
    let scaled = DMatrix::from_fn(n, p, |i, j| design[(i, j)] / scales[j]);
    let y = DVector::from_column_slice(ys);
    let gram = scaled.transpose() * &scaled;

    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if rcond.is_nan() || rcond <= MIN_RCOND {
        return Err(Error::RankDeficient { rcond });
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient { rcond })?;
    let scaled_coef = chol.solve(&(scaled.transpose() * &y));
    let coefficients: Vec<f64> = (0..p).map(|j| scaled_coef[j] / scales[j]).collect();

    let fitted = &design * DVector::from_column_slice(&coefficients);
    let rss = (&y - fitted).norm_squared();
    let sigma2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let gram_inv = chol.inverse();
    let stderr = (0..p).map(|j| (sigma2 * gram_inv[(j, j)]).max(0.0).sqrt() / scales[j]).collect();

    Ok(LinearFit { coefficients, stderr, rms_residual: (rss / n as f64).sqrt(), rcond })
}

/// `T(kappa) ~ a/kappa + b/(3 kappa^3) + c/(5 kappa^5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub stderr_c: f64,
    pub rms_residual: f64,
    pub n_points: usize,
}

pub const MIN_FIT_ROWS: usize = 6;

pub const PERIOD_LAW_BASIS: [fn(f64) -> f64; 3] =
    [|k| 1.0 / k, |k| 1.0 / (3.0 * k.powi(3)), |k| 1.0 / (5.0 * k.powi(5))];

impl FitCoefficients {
    pub fn predict(&self, kappa: f64) -> f64 {
        self.a * PERIOD_LAW_BASIS[0](kappa) + self.b * PERIOD_LAW_BASIS[1](kappa) + self.c * PERIOD_LAW_BASIS[2](kappa)
    }
}

pub fn fit_period_law_points(kappas: &[f64], periods: &[f64]) -> Result<FitCoefficients> {
    if kappas.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_FIT_ROWS} rows with T_ba, got {}",
            kappas.len()
        )));
    }
    if let Some(bad) = kappas.iter().find(|k| k.is_nan() || **k <= 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {bad}")));
    }
    let fit = least_squares(kappas, periods, &PERIOD_LAW_BASIS)?;
    Ok(FitCoefficients {
        a: fit.coefficients[0],
        b: fit.coefficients[1],
        c: fit.coefficients[2],
        stderr_a: fit.stderr[0],
        stderr_b: fit.stderr[1],
        stderr_c: fit.stderr[2],
        rms_residual: fit.rms_residual,
        n_points: kappas.len(),
    })
}

/// Fits the period law to every sweep row that has a `T_ba`.
pub fn fit_period_law(sweep: &SweepResult) -> Result<FitCoefficients> {
    let (kappas, periods): (Vec<f64>, Vec<f64>) =
        sweep.rows.iter().filter_map(|r| r.t_ba.map(|t| (r.kappa, t))).unzip();
    fit_period_law_points(&kappas, &periods)
}

/// Single-term fit `T ~ a / kappa`.
pub fn fit_inverse_law(kappas: &[f64], periods: &[f64]) -> Result<LinearFit> {
    least_squares(kappas, periods, &[|k| 1.0 / k])
}
