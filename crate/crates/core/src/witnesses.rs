//! EPR steering witnesses.
//!
//! For two modes,
//!
//! ```text
//! zeta_ab = <a^dag b><b^dag a> - <n_a (n_b + 1/2)>
//! zeta_ba = <a^dag b><b^dag a> - <n_b (n_a + 1/2)>
//! ```
//!
//! `zeta_ab > 0` certifies that mode a steers mode b; non-positive values
//! prove nothing. The N-mode form uses `|<prod_k a_k>|^2` as its cross term.

use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::dynamics::{evolve_with, expectation, DensityMatrix, EvolutionConfig, EvolutionOutcome};
use crate::error::{Error, Result};
use crate::fock::{commutator, ComplexMatrix};
use crate::model::{build_hamiltonian, InitialState, ModelParams, TwoModeSpace};

/// Largest imaginary residue tolerated on a real-valued moment.
pub const REALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSample {
    pub t: f64,
    pub zeta_ab: f64,
    pub zeta_ba: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub raw_trace_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTrace {
    pub samples: Vec<WitnessSample>,
    pub params: ModelParams,
    pub initial_state: InitialState,
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > REALITY_TOL {
        return Err(Error::NonReal { residue: z.im.abs() });
    }
    Ok(z.re)
}

/// Precomputed moment operators for the two-mode witnesses on one space.
#[derive(Debug, Clone)]
pub struct TwoModeWitness {
    space: TwoModeSpace,
    a_dag_b: ComplexMatrix,
    n_a: ComplexMatrix,
    n_b: ComplexMatrix,
    /// `n_a (n_b + 1/2)`
    ab_bound: ComplexMatrix,
    /// `n_b (n_a + 1/2)`
    ba_bound: ComplexMatrix,
}

impl TwoModeWitness {
    pub fn new(space: TwoModeSpace) -> Result<Self> {
        let ops = space.operators()?;
        let half = ops.identity.scale_real(0.5);
        Ok(Self {
            space,
            a_dag_b: &ops.a_dag * &ops.b,
            ab_bound: &ops.n_a * &(&ops.n_b + &half),
            ba_bound: &ops.n_b * &(&ops.n_a + &half),
            n_a: ops.n_a,
            n_b: ops.n_b,
        })
    }

    /// Returns `(zeta_ab, zeta_ba)`.
    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<(f64, f64)> {
        if rho.space != self.space {
            return Err(Error::DimensionMismatch { expected: self.space.total_dim(), found: rho.space.total_dim() });
        }
        let exchange = expectation(rho, &self.a_dag_b)?;
        // <b^dag a> = conj(<a^dag b>)
        let cross = (exchange * exchange.conj()).re;
        let ab = real_part(expectation(rho, &self.ab_bound)?)?;
        let ba = real_part(expectation(rho, &self.ba_bound)?)?;
        Ok((cross - ab, cross - ba))
    }

    pub fn sample(&self, t: f64, rho: &DensityMatrix) -> Result<WitnessSample> {
        let (zeta_ab, zeta_ba) = self.evaluate(rho)?;
        let n_a = real_part(expectation(rho, &self.n_a)?)?;
        let n_b = real_part(expectation(rho, &self.n_b)?)?;
        if n_a < -REALITY_TOL || n_b < -REALITY_TOL {
            return Err(Error::InvalidArgument(format!("negative occupation at t = {t}: n_a = {n_a}, n_b = {n_b}")));
        }
        Ok(WitnessSample { t, zeta_ab, zeta_ba, n_a, n_b, raw_trace_magnitude: rho.raw_trace.norm() })
    }
}

/// `(zeta_ab, zeta_ba)` of a single state.
pub fn two_mode_witnesses(rho: &DensityMatrix, space: TwoModeSpace) -> Result<(f64, f64)> {
    TwoModeWitness::new(space)?.evaluate(rho)
}

/// `|<a_1 ... a_N>|^2 - <n_1 prod_{k>=2} (n_k + 1/2)>` for mutually commuting
/// annihilation operators on a shared space.
pub fn n_mode_witness(rho: &DensityMatrix, mode_ops: &[ComplexMatrix]) -> Result<f64> {
    if mode_ops.len() < 2 {
        return Err(Error::InvalidArgument(format!("N-mode witness needs at least 2 modes, got {}", mode_ops.len())));
    }
    let dim = rho.rho.dim();
    if let Some(bad) = mode_ops.iter().find(|op| op.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    for (i, x) in mode_ops.iter().enumerate() {
        for y in &mode_ops[i + 1..] {
            if commutator(x, y).max_abs() > 1e-12 {
                return Err(Error::InvalidArgument("mode operators must act on different tensor factors".into()));
            }
        }
    }

    let product = mode_ops[1..].iter().fold(mode_ops[0].clone(), |acc, op| &acc * op);
    let cross = expectation(rho, &product)?.norm_sqr();

    let identity = ComplexMatrix::identity(dim);
    let number = |op: &ComplexMatrix| &op.adjoint() * op;
    let bound_op =
        mode_ops[1..].iter().fold(number(&mode_ops[0]), |acc, op| &acc * &(&number(op) + &identity.scale_real(0.5)));
    let bound = real_part(expectation(rho, &bound_op)?)?;
    Ok(cross - bound)
}

impl WitnessTrace {
    /// Simulates `initial` under `params` and records the witnesses at every
    /// sample.
    pub fn simulate(
        params: ModelParams,
        space: TwoModeSpace,
        initial: InitialState,
        cfg: &EvolutionConfig,
    ) -> Result<Self> {
        Self::simulate_until(params, space, initial, cfg, |_| ControlFlow::Continue(())).map(|(trace, _)| trace)
    }

    /// Like [`WitnessTrace::simulate`], stopping once `stop` breaks.
    pub fn simulate_until<F>(
        params: ModelParams,
        space: TwoModeSpace,
        initial: InitialState,
        cfg: &EvolutionConfig,
        mut stop: F,
    ) -> Result<(Self, EvolutionOutcome)>
    where
        F: FnMut(&WitnessSample) -> ControlFlow<()>,
    {
        let h = build_hamiltonian(&params, space)?;
        let psi0 = initial.prepare(space)?;
        let witness = TwoModeWitness::new(space)?;
        let mut samples = Vec::with_capacity(cfg.n_steps() / cfg.sample_stride + 1);
        let mut failure = None;
        let outcome = evolve_with(&psi0, &h, cfg, |t, rho| match witness.sample(t, rho) {
            Ok(s) => {
                samples.push(s);
                stop(&s)
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((Self { samples, params, initial_state: initial }, outcome))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}
