//! Density-matrix evolution under a non-Hermitian Hamiltonian.
//!
//! The flow is
//!
//! ```text
//! d rho / dt = -i [H+, rho] - i {H-, rho}
//! ```
//!
//! which equals `-i (H rho - rho H^dag)` and does not preserve the trace.
//! After every full step the state is mapped to `rho / tr(rho)`; the trace
//! before that mapping is kept as `raw_trace`.

use std::ops::ControlFlow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{c, matrix_exponential, ComplexMatrix};
use crate::model::{SplitHamiltonian, StateVector, TwoModeSpace};

/// Traces below this magnitude abort the evolution.
pub const COLLAPSE_TRACE: f64 = 1e-14;

/// Largest step accepted by the RK4 propagator.
pub const MAX_RK4_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub space: TwoModeSpace,
    pub rho: ComplexMatrix,
    /// Trace before the most recent normalization.
    pub raw_trace: Complex64,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let rho = ComplexMatrix::outer(&psi.amplitudes, &psi.amplitudes)?;
        let raw_trace = rho.trace();
        Ok(Self { space: psi.space, rho, raw_trace })
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho.hermitian_eigenvalues()[0]
    }

    /// Number of eigenvalues above `tol` (relative to the trace).
    pub fn rank(&self, tol: f64) -> usize {
        let scale = self.trace().re.abs().max(f64::MIN_POSITIVE);
        self.rho.hermitian_eigenvalues().iter().filter(|&&v| v / scale > tol).count()
    }

    /// Total population of basis states `|n_a, n_b>` selected by `pred`.
    pub fn population(&self, pred: impl Fn(usize, usize) -> bool) -> f64 {
        (0..self.space.total_dim())
            .filter(|&i| {
                let (na, nb) = self.space.occupations(i);
                pred(na, nb)
            })
            .map(|i| self.rho[(i, i)].re)
            .sum::<f64>()
            / self.trace().re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagator {
    /// Classic fourth-order Runge-Kutta on the density matrix.
    #[default]
    Rk4,
    /// Pure-state stepping with the fixed-step propagator `exp(-i H dt)`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
    #[serde(default = "default_true")]
    pub renormalize_each_step: bool,
    #[serde(default)]
    pub propagator: Propagator,
}

fn default_true() -> bool {
    true
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 50.0, sample_stride: 10, renormalize_each_step: true, propagator: Propagator::Rk4 }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidArgument(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidArgument("sample_stride must be at least 1".into()));
        }
        if self.propagator == Propagator::Rk4 && self.dt > MAX_RK4_DT {
            return Err(Error::InvalidArgument(format!("RK4 step {} exceeds the maximum of {MAX_RK4_DT}", self.dt)));
        }
        if self.t_max / self.dt > u32::MAX as f64 {
            return Err(Error::InvalidArgument("t_max / dt overflows the step counter".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }
}

/// Sampled trajectory. Times are `k * dt * sample_stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub times: Vec<f64>,
    pub samples: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.samples.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOutcome {
    pub steps: usize,
    pub final_time: f64,
    pub stopped_early: bool,
}

/// `-i [H+, rho] - i {H-, rho}`.
pub fn step_rhs(rho: &DensityMatrix, h: &SplitHamiltonian) -> Result<ComplexMatrix> {
    if rho.rho.dim() != h.h_plus.dim() {
        return Err(Error::DimensionMismatch { expected: h.h_plus.dim(), found: rho.rho.dim() });
    }
    let r = &rho.rho;
    let commutator = &(&h.h_plus * r) - &(r * &h.h_plus);
    let anticommutator = &(&h.h_minus * r) + &(r * &h.h_minus);
    Ok((&commutator + &anticommutator).scale(-Complex64::i()))
}

/// The right-hand side regrouped as `L rho + rho R` with `L = -i(H+ + H-)`
/// and `R = i(H+ - H-)`. Both are stored as their nonzero entries since the
/// Hamiltonian has only a few per row.
struct Flow {
    dim: usize,
    left: Vec<(usize, usize, Complex64)>,
    right: Vec<(usize, usize, Complex64)>,
}

fn nonzeros(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != c(0.0) {
                out.push((i, j, v));
            }
        }
    }
    out
}

impl Flow {
    fn new(h: &SplitHamiltonian) -> Self {
        let i = Complex64::i();
        let left = (h.h_plus.inner() + h.h_minus.inner()) * -i;
        let right = (h.h_plus.inner() - h.h_minus.inner()) * i;
        Self { dim: left.nrows(), left: nonzeros(&left), right: nonzeros(&right) }
    }

    fn apply_into(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = self.dim;
        let r = rho.as_slice();
        let o = out.as_mut_slice();
        o.fill(c(0.0));
        // column-major: element (i, j) lives at i + j * n
        for &(i, k, v) in &self.left {
            for j in 0..n {
                o[i + j * n] += v * r[k + j * n];
            }
        }
        for &(k, j, v) in &self.right {
            let (src, dst) = (&r[k * n..(k + 1) * n], &mut o[j * n..(j + 1) * n]);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * v;
            }
        }
    }
}

/// `y += alpha * x`
fn axpy(y: &mut DMatrix<Complex64>, alpha: Complex64, x: &DMatrix<Complex64>) {
    y.zip_apply(x, |yi, xi| *yi += alpha * xi);
}

struct Rk4Workspace {
    k1: DMatrix<Complex64>,
    k2: DMatrix<Complex64>,
    k3: DMatrix<Complex64>,
    k4: DMatrix<Complex64>,
    probe: DMatrix<Complex64>,
}

impl Rk4Workspace {
    fn new(dim: usize) -> Self {
        let z = || DMatrix::zeros(dim, dim);
        Self { k1: z(), k2: z(), k3: z(), k4: z(), probe: z() }
    }

    fn step(&mut self, flow: &Flow, rho: &mut DMatrix<Complex64>, dt: f64) {
        let half = c(dt / 2.0);
        flow.apply_into(rho, &mut self.k1);

        self.probe.copy_from(rho);
        axpy(&mut self.probe, half, &self.k1);
        flow.apply_into(&self.probe, &mut self.k2);

        self.probe.copy_from(rho);
        axpy(&mut self.probe, half, &self.k2);
        flow.apply_into(&self.probe, &mut self.k3);

        self.probe.copy_from(rho);
        axpy(&mut self.probe, c(dt), &self.k3);
        flow.apply_into(&self.probe, &mut self.k4);

        let sixth = c(dt / 6.0);
        let third = c(dt / 3.0);
        axpy(rho, sixth, &self.k1);
        axpy(rho, third, &self.k2);
        axpy(rho, third, &self.k3);
        axpy(rho, sixth, &self.k4);
    }
}

fn check_space(psi0: &StateVector, h: &SplitHamiltonian) -> Result<()> {
    if psi0.space != h.space {
        return Err(Error::DimensionMismatch { expected: h.space.total_dim(), found: psi0.space.total_dim() });
    }
    Ok(())
}

fn check_trace(t: f64, trace: Complex64) -> Result<()> {
    if !(trace.re.is_finite() && trace.im.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    if trace.norm() < COLLAPSE_TRACE {
        return Err(Error::TraceCollapse { t, trace: trace.norm() });
    }
    Ok(())
}

/// Evolves `psi0` and hands every sampled state to `observer`, which may stop
/// the run early.
pub fn evolve_with<F>(
    psi0: &StateVector,
    h: &SplitHamiltonian,
    cfg: &EvolutionConfig,
    mut observer: F,
) -> Result<EvolutionOutcome>
where
    F: FnMut(f64, &DensityMatrix) -> ControlFlow<()>,
{
    cfg.validate()?;
    check_space(psi0, h)?;
    let n_steps = cfg.n_steps();
    let finish =
        |steps: usize, stopped_early| EvolutionOutcome { steps, final_time: steps as f64 * cfg.dt, stopped_early };

    match cfg.propagator {
        Propagator::Rk4 => {
            let flow = Flow::new(h);
            let mut state = DensityMatrix::from_pure(psi0)?;
            let mut work = Rk4Workspace::new(h.space.total_dim());
            if observer(0.0, &state).is_break() {
                return Ok(finish(0, true));
            }
            for step in 1..=n_steps {
                let t = step as f64 * cfg.dt;
                work.step(&flow, state.rho.inner_mut(), cfg.dt);
                let trace = state.rho.trace();
                check_trace(t, trace)?;
                if !state.rho.is_finite() {
                    return Err(Error::NonFinite { t });
                }
                state.raw_trace = trace;
                if cfg.renormalize_each_step {
                    *state.rho.inner_mut() /= c(trace.re);
                }
                if step % cfg.sample_stride == 0 && observer(t, &state).is_break() {
                    return Ok(finish(step, true));
                }
            }
            Ok(finish(n_steps, false))
        }
        Propagator::Exact => {
            let generator = h.recombined().scale(-Complex64::i() * cfg.dt);
            let step_op = matrix_exponential(&generator)?;
            let mut psi = psi0.clone();
            let emit = |psi: &StateVector| -> Result<DensityMatrix> {
                let rho = ComplexMatrix::outer(&psi.amplitudes, &psi.amplitudes)?;
                Ok(DensityMatrix { space: psi.space, raw_trace: rho.trace(), rho })
            };
            if observer(0.0, &emit(&psi)?).is_break() {
                return Ok(finish(0, true));
            }
            for step in 1..=n_steps {
                let t = step as f64 * cfg.dt;
                psi.amplitudes = step_op.apply(&psi.amplitudes)?;
                let norm_sqr: f64 = psi.amplitudes.iter().map(|z| z.norm_sqr()).sum();
                check_trace(t, c(norm_sqr))?;
                let raw_trace = c(norm_sqr);
                if cfg.renormalize_each_step {
                    let s = norm_sqr.sqrt().recip();
                    psi.amplitudes.iter_mut().for_each(|z| *z *= s);
                }
                if step % cfg.sample_stride == 0 {
                    let mut state = emit(&psi)?;
                    state.raw_trace = raw_trace;
                    if observer(t, &state).is_break() {
                        return Ok(finish(step, true));
                    }
                }
            }
            Ok(finish(n_steps, false))
        }
    }
}

/// Evolves `psi0` and keeps every sampled density matrix.
pub fn evolve(psi0: &StateVector, h: &SplitHamiltonian, cfg: &EvolutionConfig) -> Result<TimeSeries<DensityMatrix>> {
    let mut series = TimeSeries { times: Vec::new(), samples: Vec::new() };
    evolve_with(psi0, h, cfg, |t, rho| {
        series.times.push(t);
        series.samples.push(rho.clone());
        ControlFlow::Continue(())
    })?;
    Ok(series)
}

/// `M rho(0) M^dag / tr(...)` with `M = exp(-i (H+ + H-) t)`.
pub fn exact_propagator(psi0: &StateVector, h: &SplitHamiltonian, t: f64) -> Result<DensityMatrix> {
    check_space(psi0, h)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite, got {t}")));
    }
    let m = matrix_exponential(&h.recombined().scale(-Complex64::i() * t))?;
    let rho0 = DensityMatrix::from_pure(psi0)?;
    let evolved = &(&m * &rho0.rho) * &m.adjoint();
    let raw_trace = evolved.trace();
    check_trace(t, raw_trace)?;
    Ok(DensityMatrix { space: psi0.space, rho: evolved.scale_real(raw_trace.re.recip()), raw_trace })
}

/// `tr(q rho) / tr(rho)`.
pub fn expectation(rho: &DensityMatrix, q: &ComplexMatrix) -> Result<Complex64> {
    let trace = rho.trace();
    if trace.norm() == 0.0 {
        return Err(Error::InvalidArgument("expectation on a zero-trace state".into()));
    }
    Ok(q.trace_of_product(&rho.rho)? / trace)
}
