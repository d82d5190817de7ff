#![allow(dead_code)]

use std::path::{Path, PathBuf};

use soliplasmon::dynamics::EvolutionConfig;
use soliplasmon::model::{InitialState, ModelParams, TwoModeSpace};
use soliplasmon::witnesses::WitnessTrace;

pub const G: f64 = 0.1;

/// Population of mode a for `|1,0>` in the single-excitation block.
pub fn closed_form_pa(kappa: f64, t: f64) -> f64 {
    let theta = G * kappa.sqrt() * t;
    let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
    c2 / (c2 + kappa * s2)
}

/// `(zeta_ab, zeta_ba)` for `|1,0>` at time `t`.
pub fn closed_form_witnesses(kappa: f64, t: f64) -> (f64, f64) {
    let p = closed_form_pa(kappa, t);
    (p * (0.5 - p), (1.0 - p) * (p - 0.5))
}

/// First zeta_ba excursion for `|1,0>`: from 0 to where `p = 1/2`.
pub fn closed_form_t_ba(kappa: f64) -> f64 {
    (1.0 / kappa.sqrt()).atan() / (G * kappa.sqrt())
}

/// One zeta_ab lobe for `|1,0>`.
pub fn closed_form_t_ab(kappa: f64) -> f64 {
    kappa.sqrt().atan() / (G * kappa.sqrt())
}

pub fn fock_trace(kappa: f64, n_a: usize, n_b: usize, t_max: f64) -> WitnessTrace {
    let cfg = EvolutionConfig { t_max, ..Default::default() };
    WitnessTrace::simulate(
        ModelParams::default().with_kappa(kappa),
        TwoModeSpace::new(4, 4).unwrap(),
        InitialState::Fock { n_a, n_b },
        &cfg,
    )
    .unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_soliplasmon")
}

pub fn fock_config(kappa: f64, n_a: usize, n_b: usize, t_max: f64) -> String {
    format!(
        r#"cutoffs = [4, 4]
threshold = 1e-6
output_path = "witness.csv"

[model]
omega = 1.0
u = -0.01
g = 0.1
kappa = {kappa:?}

[initial_state]
kind = "fock"
n_a = {n_a}
n_b = {n_b}

[evolution]
dt = 0.001
t_max = {t_max:?}
sample_stride = 10
"#
    )
}

pub fn coherent_config(alpha: f64, cutoff: usize, t_max: f64) -> String {
    format!(
        r#"cutoffs = [{cutoff}, {cutoff}]

[model]
omega = 1.0
u = -0.01
g = 0.1
kappa = 1.0

[initial_state]
kind = "coherent"
alpha_re = {alpha:?}
alpha_im = 0.0
mode = "a"
override_leakage_guard = true

[evolution]
dt = 0.01
t_max = {t_max:?}
sample_stride = 1
propagator = "exact"
"#
    )
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// CSV text for `T = a/k + b/(3k^3) + c/(5k^5)` on `kappas`.
pub fn exact_law_csv(a: f64, b: f64, c: f64, kappas: &[f64]) -> String {
    let mut out = String::from("kappa,T_ba,T_ab\n");
    for &k in kappas {
        let t = a / k + b / (3.0 * k.powi(3)) + c / (5.0 * k.powi(5));
        out.push_str(&format!("{k:.17e},{t:.17e},\n"));
    }
    out
}
