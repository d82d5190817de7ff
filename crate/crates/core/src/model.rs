//! The soliton-plasmon Hamiltonian on a truncated two-mode Fock space.
//!
//! Mode `a` is the soliton, mode `b` the plasmon. The Hamiltonian is
//!
//! ```text
//! H = w a^dag a + w b^dag b + U a^dag a^dag a a + g_ab a b^dag + g_ba sqrt(n_a) a^dag b
//! ```
//!
//! with `g_ab = kappa * g` and `g_ba = g`. It is non-Hermitian for every
//! `g != 0`, so it is stored together with its Hermitian and anti-Hermitian
//! parts.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, c, diag_sqrt, kron, ComplexMatrix};

/// Norm deficit above which a truncated coherent state is reported.
pub const COHERENT_DEFICIT_WARN: f64 = 1e-10;

/// Index layout of the truncated two-mode space: `|i_a, i_b>` is at
/// `i_a * cutoff_b + i_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoModeSpace {
    cutoff_a: usize,
    cutoff_b: usize,
}

impl TwoModeSpace {
    pub fn new(cutoff_a: usize, cutoff_b: usize) -> Result<Self> {
        if cutoff_a == 0 || cutoff_b == 0 {
            return Err(Error::InvalidArgument(format!("Fock cutoffs must be positive, got ({cutoff_a}, {cutoff_b})")));
        }
        if cutoff_a.saturating_mul(cutoff_b) > fock::MAX_DIM {
            return Err(Error::DimensionOverflow { requested: cutoff_a.saturating_mul(cutoff_b), max: fock::MAX_DIM });
        }
        Ok(Self { cutoff_a, cutoff_b })
    }

    pub fn cutoff_a(&self) -> usize {
        self.cutoff_a
    }

    pub fn cutoff_b(&self) -> usize {
        self.cutoff_b
    }

    pub fn total_dim(&self) -> usize {
        self.cutoff_a * self.cutoff_b
    }

    pub fn index(&self, n_a: usize, n_b: usize) -> Result<usize> {
        if n_a >= self.cutoff_a || n_b >= self.cutoff_b {
            return Err(Error::InvalidArgument(format!(
                "Fock state |{n_a},{n_b}> outside truncation ({}, {})",
                self.cutoff_a, self.cutoff_b
            )));
        }
        Ok(n_a * self.cutoff_b + n_b)
    }

    /// Inverse of [`TwoModeSpace::index`].
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        (index / self.cutoff_b, index % self.cutoff_b)
    }

    /// Embeds a mode-a operator as `op ⊗ I`.
    pub fn lift_a(&self, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(op, self.cutoff_a)?;
        kron(op, &ComplexMatrix::identity(self.cutoff_b))
    }

    /// Embeds a mode-b operator as `I ⊗ op`.
    pub fn lift_b(&self, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(op, self.cutoff_b)?;
        kron(&ComplexMatrix::identity(self.cutoff_a), op)
    }

    pub fn operators(&self) -> Result<ModeOperators> {
        ModeOperators::new(*self)
    }
}

fn check_dim(op: &ComplexMatrix, dim: usize) -> Result<()> {
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
    }
    Ok(())
}

/// Ladder and number operators of both modes, embedded in the two-mode space.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub space: TwoModeSpace,
    pub a: ComplexMatrix,
    pub a_dag: ComplexMatrix,
    pub b: ComplexMatrix,
    pub b_dag: ComplexMatrix,
    pub n_a: ComplexMatrix,
    pub n_b: ComplexMatrix,
    pub identity: ComplexMatrix,
}

impl ModeOperators {
    pub fn new(space: TwoModeSpace) -> Result<Self> {
        let a = space.lift_a(&fock::annihilation(space.cutoff_a)?)?;
        let b = space.lift_b(&fock::annihilation(space.cutoff_b)?)?;
        let a_dag = a.adjoint();
        let b_dag = b.adjoint();
        let n_a = &a_dag * &a;
        let n_b = &b_dag * &b;
        Ok(Self { space, identity: ComplexMatrix::identity(space.total_dim()), a, a_dag, b, b_dag, n_a, n_b })
    }
}

/// Physical constants, all in units of the resonance frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega: f64,
    /// Kerr strength.
    pub u: f64,
    /// Base coupling; `g_ba = g`.
    pub g: f64,
    /// Coupling asymmetry; `g_ab = kappa * g`.
    pub kappa: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { omega: 1.0, u: -0.01, g: 0.1, kappa: 1.0 }
    }
}

impl ModelParams {
    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn g_ab(&self) -> f64 {
        self.kappa * self.g
    }

    pub fn g_ba(&self) -> f64 {
        self.g
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega", self.omega), ("u", self.u), ("g", self.g), ("kappa", self.kappa)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// `H = h_plus + h_minus` with `h_plus` Hermitian and `h_minus` anti-Hermitian.
#[derive(Debug, Clone)]
pub struct SplitHamiltonian {
    pub space: TwoModeSpace,
    pub h_plus: ComplexMatrix,
    pub h_minus: ComplexMatrix,
    /// The Hamiltonian as assembled term by term, before splitting.
    pub full: ComplexMatrix,
}

impl SplitHamiltonian {
    /// Splits an arbitrary operator via `(H ± H^dag) / 2`.
    pub fn from_full(space: TwoModeSpace, full: ComplexMatrix) -> Result<Self> {
        check_dim(&full, space.total_dim())?;
        let adj = full.adjoint();
        let h_plus = (&full + &adj).scale_real(0.5);
        let h_minus = (&full - &adj).scale_real(0.5);
        Ok(Self { space, h_plus, h_minus, full })
    }

    /// The same system with the anti-Hermitian part removed.
    pub fn hermitianized(&self) -> Self {
        Self {
            space: self.space,
            h_plus: self.h_plus.clone(),
            h_minus: ComplexMatrix::zeros(self.space.total_dim()),
            full: self.h_plus.clone(),
        }
    }

    /// `h_plus + h_minus`.
    pub fn recombined(&self) -> ComplexMatrix {
        &self.h_plus + &self.h_minus
    }
}

pub fn build_hamiltonian(params: &ModelParams, space: TwoModeSpace) -> Result<SplitHamiltonian> {
    params.validate()?;
    if space.cutoff_a < 2 || space.cutoff_b < 2 {
        return Err(Error::InvalidArgument(format!(
            "both cutoffs must be at least 2, got ({}, {})",
            space.cutoff_a, space.cutoff_b
        )));
    }
    let ops = space.operators()?;
    let ModeOperators { a, a_dag, b, b_dag, n_a, n_b, .. } = &ops;

    let free = (n_a + n_b).scale_real(params.omega);
    let kerr = (&(&(a_dag * a_dag) * a) * a).scale_real(params.u);
    let exchange_ab = (a * b_dag).scale_real(params.g_ab());
    // sqrt(n_a) acts last, in the written order sqrt(n_a) a^dag b
    let exchange_ba = (&(&diag_sqrt(n_a)? * a_dag) * b).scale_real(params.g_ba());

    let full = free + kerr + exchange_ab + exchange_ba;
    SplitHamiltonian::from_full(space, full)
}

/// Normalized pure state on a two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub space: TwoModeSpace,
    pub amplitudes: Vec<Complex64>,
    /// `1 - norm^2` before renormalization (zero for exact Fock states).
    pub truncation_deficit: f64,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn fock_state(space: TwoModeSpace, n_a: usize, n_b: usize) -> Result<StateVector> {
    let idx = space.index(n_a, n_b)?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); space.total_dim()];
    amplitudes[idx] = fock::one();
    Ok(StateVector { space, amplitudes, truncation_deficit: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakageGuard {
    Enforce,
    Override,
}

/// Smallest cutoff the leakage guard accepts for amplitude `|alpha|`.
pub fn coherent_min_cutoff(alpha: Complex64) -> usize {
    let r = alpha.norm();
    (r * r + 6.0 * r + 10.0).ceil() as usize
}

/// Truncated coherent state `|alpha>` on `mode`, the other mode in vacuum.
pub fn coherent_state(space: TwoModeSpace, alpha: Complex64, mode: Mode, guard: LeakageGuard) -> Result<StateVector> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::InvalidArgument("coherent amplitude must be finite".into()));
    }
    let cutoff = match mode {
        Mode::A => space.cutoff_a,
        Mode::B => space.cutoff_b,
    };
    let min_cutoff = coherent_min_cutoff(alpha);
    if guard == LeakageGuard::Enforce && cutoff < min_cutoff {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} too small for |alpha| = {}; need at least {min_cutoff} or override the leakage guard",
            alpha.norm()
        )));
    }

    let mut coeffs = Vec::with_capacity(cutoff);
    let mut term = c((-alpha.norm_sqr() / 2.0).exp());
    coeffs.push(term);
    for n in 1..cutoff {
        term = term * alpha / (n as f64).sqrt();
        coeffs.push(term);
    }
    let norm_sqr: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    let deficit = 1.0 - norm_sqr;
    if deficit > COHERENT_DEFICIT_WARN {
        warn!("coherent state alpha = {alpha} truncated at {cutoff} levels loses {deficit:e} of its norm");
    }
    let scale = norm_sqr.sqrt().recip();

    let mut amplitudes = vec![Complex64::new(0.0, 0.0); space.total_dim()];
    for (n, z) in coeffs.into_iter().enumerate() {
        let idx = match mode {
            Mode::A => space.index(n, 0)?,
            Mode::B => space.index(0, n)?,
        };
        amplitudes[idx] = z * scale;
    }
    Ok(StateVector { space, amplitudes, truncation_deficit: deficit })
}

/// Initial-state descriptor, as written in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialState {
    Fock {
        n_a: usize,
        n_b: usize,
    },
    Coherent {
        alpha_re: f64,
        alpha_im: f64,
        mode: Mode,
        #[serde(default)]
        override_leakage_guard: bool,
    },
}

impl InitialState {
    pub fn prepare(&self, space: TwoModeSpace) -> Result<StateVector> {
        match *self {
            InitialState::Fock { n_a, n_b } => fock_state(space, n_a, n_b),
            InitialState::Coherent { alpha_re, alpha_im, mode, override_leakage_guard } => {
                let guard = if override_leakage_guard { LeakageGuard::Override } else { LeakageGuard::Enforce };
                coherent_state(space, Complex64::new(alpha_re, alpha_im), mode, guard)
            }
        }
    }
}

impl std::fmt::Display for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialState::Fock { n_a, n_b } => write!(f, "fock({n_a},{n_b})"),
            InitialState::Coherent { alpha_re, alpha_im, mode, .. } => {
                let m = match mode {
                    Mode::A => "a",
                    Mode::B => "b",
                };
                write!(f, "coherent({alpha_re}{alpha_im:+}i,{m})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::commutator;

    fn space(a: usize, b: usize) -> TwoModeSpace {
        TwoModeSpace::new(a, b).unwrap()
    }

    #[test]
    fn index_layout_is_bijective() {
        let s = space(3, 5);
        let mut seen = vec![false; s.total_dim()];
        for na in 0..3 {
            for nb in 0..5 {
                let idx = s.index(na, nb).unwrap();
                assert!(!seen[idx]);
                seen[idx] = true;
                assert_eq!(s.occupations(idx), (na, nb));
            }
        }
        assert!(seen.iter().all(|&x| x));
        assert!(s.index(3, 0).is_err());
        assert!(TwoModeSpace::new(0, 2).is_err());
    }

    #[test]
    fn non_hermitian_even_for_equal_couplings() {
        let p = ModelParams { u: 0.0, ..ModelParams::default() };
        let h = build_hamiltonian(&p, space(4, 4)).unwrap();
        assert!(!h.full.is_hermitian(1e-6));
        assert!(h.h_minus.max_abs() > 1e-3);
    }

    #[test]
    fn decoupled_modes_are_hermitian() {
        let p = ModelParams { g: 0.0, u: 0.0, ..ModelParams::default() };
        let s = space(4, 3);
        let h = build_hamiltonian(&p, s).unwrap();
        let ops = s.operators().unwrap();
        assert_eq!(h.h_minus, ComplexMatrix::zeros(12));
        assert!(h.h_plus.max_abs_diff(&(&ops.n_a + &ops.n_b)) == 0.0);
    }

    #[test]
    fn split_parts_and_reconstruction() {
        for kappa in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let h = build_hamiltonian(&ModelParams::default().with_kappa(kappa), space(5, 4)).unwrap();
            assert!(h.h_plus.is_hermitian(1e-12));
            assert!(h.h_minus.is_anti_hermitian(1e-12));
            // (x+y)/2 + (x-y)/2 can differ from x by one rounding
            assert!(h.recombined().max_abs_diff(&h.full) <= 2.0 * f64::EPSILON * h.full.max_abs());
        }
    }

    #[test]
    fn single_excitation_block() {
        let p = ModelParams::default().with_kappa(1.7);
        let s = space(4, 4);
        let h = build_hamiltonian(&p, s).unwrap();
        let i10 = s.index(1, 0).unwrap();
        let i01 = s.index(0, 1).unwrap();
        // [[w, g_ba], [g_ab, w]] in the basis (|1,0>, |0,1>)
        assert!((h.full[(i10, i10)] - c(p.omega)).norm() < 1e-15);
        assert!((h.full[(i01, i01)] - c(p.omega)).norm() < 1e-15);
        assert!((h.full[(i10, i01)] - c(p.g_ba())).norm() < 1e-15);
        assert!((h.full[(i01, i10)] - c(p.g_ab())).norm() < 1e-15);
        assert!((h.full[(i01, i10)] - c(p.kappa * p.g)).norm() < 1e-15);
        // nothing else couples into the block
        for k in 0..s.total_dim() {
            if k != i10 && k != i01 {
                assert_eq!(h.full[(k, i10)], c(0.0));
                assert_eq!(h.full[(k, i01)], c(0.0));
            }
        }
    }

    #[test]
    fn kerr_term_is_diagonal_n_n_minus_one() {
        let p = ModelParams { g: 0.0, ..ModelParams::default() };
        let s = space(5, 2);
        let h = build_hamiltonian(&p, s).unwrap();
        for na in 0..5 {
            for nb in 0..2 {
                let i = s.index(na, nb).unwrap();
                let n = na as f64;
                let want = p.omega * (n + nb as f64) + p.u * n * (n - 1.0);
                assert!((h.full[(i, i)] - c(want)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn total_number_is_conserved() {
        let s = space(5, 5);
        let ops = s.operators().unwrap();
        let total = &ops.n_a + &ops.n_b;
        for kappa in [0.3, 1.0, 4.0] {
            let h = build_hamiltonian(&ModelParams::default().with_kappa(kappa), s).unwrap();
            assert!(commutator(&h.full, &total).max_abs() < 1e-12);
        }
    }

    #[test]
    fn build_rejects_tiny_cutoffs_and_bad_kappa() {
        assert!(build_hamiltonian(&ModelParams::default(), space(1, 4)).is_err());
        assert!(build_hamiltonian(&ModelParams::default().with_kappa(0.0), space(3, 3)).is_err());
        assert!(build_hamiltonian(&ModelParams::default().with_kappa(f64::NAN), space(3, 3)).is_err());
    }

    #[test]
    fn fock_state_layout() {
        let psi = fock_state(space(2, 2), 1, 0).unwrap();
        assert_eq!(psi.amplitudes[2], c(1.0));
        assert_eq!(psi.norm(), 1.0);
        assert!(fock_state(space(2, 2), 2, 0).is_err());
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = space(4, 4);
        let psi = coherent_state(s, c(0.0), Mode::A, LeakageGuard::Override).unwrap();
        assert_eq!(psi.amplitudes, fock_state(s, 0, 0).unwrap().amplitudes);
    }

    #[test]
    fn coherent_alpha_one_at_cutoff_sixteen() {
        let s = space(16, 16);
        assert_eq!(coherent_min_cutoff(c(1.0)), 17);
        assert!(coherent_state(s, c(1.0), Mode::A, LeakageGuard::Enforce).is_err());

        let psi = coherent_state(s, c(1.0), Mode::A, LeakageGuard::Override).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!(psi.truncation_deficit <= 1e-12);

        // <n> by direct summation over the Poisson weights
        let mean: f64 = (0..16).map(|n| n as f64 * psi.amplitudes[s.index(n, 0).unwrap()].norm_sqr()).sum();
        assert!((mean - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_on_mode_b_and_phase() {
        let s = space(3, 20);
        let alpha = Complex64::new(0.6, -0.8);
        let psi = coherent_state(s, alpha, Mode::B, LeakageGuard::Enforce).unwrap();
        let ratio = psi.amplitudes[s.index(0, 1).unwrap()] / psi.amplitudes[s.index(0, 0).unwrap()];
        assert!((ratio - alpha).norm() < 1e-14);
        assert_eq!(psi.amplitudes[s.index(1, 0).unwrap()], c(0.0));
    }

    #[test]
    fn coherent_heavy_truncation_records_deficit() {
        let s = space(3, 3);
        let psi = coherent_state(s, c(2.0), Mode::A, LeakageGuard::Override).unwrap();
        assert!(psi.truncation_deficit > COHERENT_DEFICIT_WARN);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
