mod common;

use std::ops::ControlFlow;

use num_complex::Complex64;
use proptest::prelude::*;

use soliplasmon::dynamics::{evolve_with, expectation, DensityMatrix, EvolutionConfig};
use soliplasmon::model::{build_hamiltonian, fock_state, ModelParams, StateVector, TwoModeSpace};
use soliplasmon::witnesses::{n_mode_witness, two_mode_witnesses};

fn state(space: TwoModeSpace, raw: &[(f64, f64)]) -> StateVector {
    let mut amplitudes: Vec<Complex64> = raw.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amplitudes.iter_mut().for_each(|z| *z /= norm);
    StateVector { space, amplitudes, truncation_deficit: 0.0 }
}

/// Same state with the two tensor factors exchanged.
fn swap_modes(psi: &StateVector) -> StateVector {
    let s = psi.space;
    let swapped = TwoModeSpace::new(s.cutoff_b(), s.cutoff_a()).unwrap();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); s.total_dim()];
    for (i, z) in psi.amplitudes.iter().enumerate() {
        let (na, nb) = s.occupations(i);
        amplitudes[swapped.index(nb, na).unwrap()] = *z;
    }
    StateVector { space: swapped, amplitudes, truncation_deficit: psi.truncation_deficit }
}

fn nonzero(raw: &[(f64, f64)]) -> bool {
    raw.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 0.1
}

proptest! {
    #[test]
    fn mode_swap_exchanges_witnesses(raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
        prop_assume!(nonzero(&raw));
        let psi = state(TwoModeSpace::new(3, 4).unwrap(), &raw);
        let swapped = swap_modes(&psi);
        let (ab, ba) = two_mode_witnesses(&DensityMatrix::from_pure(&psi).unwrap(), psi.space).unwrap();
        let (ab_s, ba_s) = two_mode_witnesses(&DensityMatrix::from_pure(&swapped).unwrap(), swapped.space).unwrap();
        prop_assert!((ab - ba_s).abs() < 1e-14, "{} vs {}", ab, ba_s);
        prop_assert!((ba - ab_s).abs() < 1e-14, "{} vs {}", ba, ab_s);
    }

    #[test]
    fn exchange_moments_are_conjugate(raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)) {
        prop_assume!(nonzero(&raw));
        let s = TwoModeSpace::new(4, 4).unwrap();
        let rho = DensityMatrix::from_pure(&state(s, &raw)).unwrap();
        let ops = s.operators().unwrap();
        let ab = expectation(&rho, &(&ops.a_dag * &ops.b)).unwrap();
        let ba = expectation(&rho, &(&ops.b_dag * &ops.a)).unwrap();
        prop_assert!((ba - ab.conj()).norm() < 1e-12);
    }
}

#[test]
fn exchange_moments_stay_conjugate_along_evolution() {
    let s = TwoModeSpace::new(4, 4).unwrap();
    let ops = s.operators().unwrap();
    let (ab_op, ba_op) = (&ops.a_dag * &ops.b, &ops.b_dag * &ops.a);
    let h = build_hamiltonian(&ModelParams::default().with_kappa(2.0), s).unwrap();
    let cfg = EvolutionConfig { sample_stride: 100, ..Default::default() };
    evolve_with(&fock_state(s, 1, 0).unwrap(), &h, &cfg, |t, rho| {
        let ab = expectation(rho, &ab_op).unwrap();
        let ba = expectation(rho, &ba_op).unwrap();
        assert!((ba - ab.conj()).norm() < 1e-12, "t = {t}");
        ControlFlow::Continue(())
    })
    .unwrap();
}

#[test]
fn single_photon_witnesses_follow_closed_form() {
    for kappa in [0.5, 1.0, 2.0] {
        let trace = common::fock_trace(kappa, 1, 0, 50.0);
        for s in trace.samples.iter().step_by(7) {
            let (ab, ba) = common::closed_form_witnesses(kappa, s.t);
            assert!((s.zeta_ab - ab).abs() < 1e-9, "kappa = {kappa}, t = {}", s.t);
            assert!((s.zeta_ba - ba).abs() < 1e-9, "kappa = {kappa}, t = {}", s.t);
        }
    }
}

#[test]
fn steering_is_never_mutual() {
    for kappa in [0.5, 1.0, 2.0] {
        let trace = common::fock_trace(kappa, 1, 0, 50.0);
        for s in &trace.samples {
            assert!(s.zeta_ab.min(s.zeta_ba) <= 1e-6, "kappa = {kappa}, t = {}", s.t);
        }
    }
}

#[test]
fn product_witness_vanishes_without_two_mode_coherence() {
    // the product-moment witness sees <ab>, which stays zero for |1,0>
    let s = TwoModeSpace::new(4, 4).unwrap();
    let ops = s.operators().unwrap();
    let h = build_hamiltonian(&ModelParams::default().with_kappa(2.0), s).unwrap();
    let cfg = EvolutionConfig { t_max: 20.0, sample_stride: 500, ..Default::default() };
    evolve_with(&fock_state(s, 1, 0).unwrap(), &h, &cfg, |t, rho| {
        let w = n_mode_witness(rho, &[ops.a.clone(), ops.b.clone()]).unwrap();
        let na = expectation(rho, &ops.n_a).unwrap().re;
        assert!((w + na / 2.0).abs() < 1e-12, "t = {t}: {w}");
        ControlFlow::Continue(())
    })
    .unwrap();
}
