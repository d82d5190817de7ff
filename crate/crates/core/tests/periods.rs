mod common;

use soliplasmon::analysis::{
    detect_periods, fit_inverse_law, kappa_grid, sweep_kappa, Spacing, SweepSetup, WitnessId, DEFAULT_THRESHOLD,
};
use soliplasmon::model::ModelParams;

const SAMPLE_DT: f64 = 0.01;

#[test]
fn durations_are_threshold_stable() {
    for kappa in [0.5, 1.0, 2.0] {
        let trace = common::fock_trace(kappa, 1, 0, 50.0);
        for id in [WitnessId::Ab, WitnessId::Ba] {
            let coarse = detect_periods(&trace, id, DEFAULT_THRESHOLD).unwrap();
            let fine = detect_periods(&trace, id, DEFAULT_THRESHOLD / 2.0).unwrap();
            assert_eq!(coarse.len(), fine.len(), "kappa = {kappa}, zeta_{id}");
            for (p, q) in coarse.iter().zip(&fine) {
                let rel = (p.duration - q.duration).abs() / p.duration;
                assert!(rel < 1e-3, "kappa = {kappa}, zeta_{id}: {} vs {}", p.duration, q.duration);
            }
        }
    }
}

#[test]
fn first_periods_match_closed_form() {
    for kappa in [0.5, 1.0, 2.0] {
        let trace = common::fock_trace(kappa, 1, 0, 50.0);
        let ba = &detect_periods(&trace, WitnessId::Ba, DEFAULT_THRESHOLD).unwrap()[0];
        let ab = &detect_periods(&trace, WitnessId::Ab, DEFAULT_THRESHOLD).unwrap()[0];
        assert_eq!(ba.t_start, 0.0);
        assert!((ba.duration - common::closed_form_t_ba(kappa)).abs() < SAMPLE_DT, "kappa = {kappa}");
        assert!((ab.duration - common::closed_form_t_ab(kappa)).abs() < SAMPLE_DT, "kappa = {kappa}");
        assert!((ab.t_start - common::closed_form_t_ba(kappa)).abs() < SAMPLE_DT, "kappa = {kappa}");
    }
}

#[test]
fn unit_kappa_lobe_is_about_eight() {
    let trace = common::fock_trace(1.0, 1, 0, 50.0);
    let ab = &detect_periods(&trace, WitnessId::Ab, DEFAULT_THRESHOLD).unwrap()[0];
    assert!((7.2..=8.8).contains(&ab.duration), "T_ab = {}", ab.duration);
    assert!(!ab.merged_lobes);
}

/// "From zero at t = 0 to the next zero": first sign change of zeta_ba after
/// the origin, linearly interpolated.
fn zero_to_zero(trace: &soliplasmon::witnesses::WitnessTrace) -> f64 {
    let s = &trace.samples;
    assert_eq!(s[0].zeta_ba.abs(), 0.0);
    let mut seen_positive = false;
    for w in s.windows(2) {
        seen_positive |= w[0].zeta_ba > 0.0;
        if seen_positive && w[0].zeta_ba > 0.0 && w[1].zeta_ba <= 0.0 {
            let f = w[0].zeta_ba / (w[0].zeta_ba - w[1].zeta_ba);
            return w[0].t + f * (w[1].t - w[0].t);
        }
    }
    panic!("zeta_ba never returned to zero");
}

#[test]
fn excursion_and_zero_crossing_definitions_agree() {
    for kappa in [0.5, 0.75, 1.0, 1.5, 2.0] {
        let trace = common::fock_trace(kappa, 1, 0, 40.0);
        let ba = &detect_periods(&trace, WitnessId::Ba, DEFAULT_THRESHOLD).unwrap()[0];
        let direct = zero_to_zero(&trace);
        assert!((ba.duration - direct).abs() <= SAMPLE_DT, "kappa = {kappa}: {} vs {direct}", ba.duration);
    }
}

#[test]
fn swapping_the_initial_photon_swaps_the_leading_witness() {
    for kappa in [0.5, 2.0] {
        let from_a = common::fock_trace(kappa, 1, 0, 50.0);
        let from_b = common::fock_trace(kappa, 0, 1, 50.0);
        let first = |t: &soliplasmon::witnesses::WitnessTrace, id| detect_periods(t, id, DEFAULT_THRESHOLD).unwrap()[0];

        assert_eq!(first(&from_a, WitnessId::Ba).t_start, 0.0);
        assert!(first(&from_a, WitnessId::Ab).t_start > 1.0);
        assert_eq!(first(&from_b, WitnessId::Ab).t_start, 0.0);
        assert!(first(&from_b, WitnessId::Ba).t_start > 1.0);

        // the leading period from |0,1> runs until the populations balance
        let lead = first(&from_b, WitnessId::Ab).duration;
        assert!((lead - common::closed_form_t_ab(kappa)).abs() < SAMPLE_DT, "kappa = {kappa}: {lead}");
    }
}

#[test]
fn t_ba_decreases_with_kappa() {
    let kappas = kappa_grid(0.5, 5.0, 10, Spacing::Geometric).unwrap();
    let sweep = sweep_kappa(&ModelParams::default(), &kappas, &SweepSetup::default()).unwrap();
    let periods: Vec<f64> = sweep.rows.iter().map(|r| r.t_ba.expect("T_ba present")).collect();
    for (w, k) in periods.windows(2).zip(kappas.windows(2)) {
        assert!(w[1] < w[0], "T_ba({}) = {} not below T_ba({}) = {}", k[1], w[1], k[0], w[0]);
    }
}

#[test]
fn sweep_rows_agree_with_individual_runs() {
    let kappas = [0.5, 1.0, 2.0];
    let sweep = sweep_kappa(&ModelParams::default(), &kappas, &SweepSetup::default()).unwrap();
    for row in &sweep.rows {
        let trace = common::fock_trace(row.kappa, 1, 0, 50.0);
        let ba = detect_periods(&trace, WitnessId::Ba, DEFAULT_THRESHOLD).unwrap()[0].duration;
        let ab = detect_periods(&trace, WitnessId::Ab, DEFAULT_THRESHOLD).unwrap()[0].duration;
        assert!((row.t_ba.unwrap() - ba).abs() < 1e-12, "kappa = {}", row.kappa);
        assert!((row.t_ab.unwrap() - ab).abs() < 1e-12, "kappa = {}", row.kappa);
    }
}

#[test]
fn slow_regime_window_grows_with_inverse_kappa() {
    let sweep = sweep_kappa(&ModelParams::default(), &[0.1], &SweepSetup::default()).unwrap();
    let row = &sweep.rows[0];
    assert_eq!(row.t_window, 200.0);
    let t_ba = row.t_ba.expect("T_ba present at kappa = 0.1");
    assert!((t_ba - common::closed_form_t_ba(0.1)).abs() < SAMPLE_DT);
}

#[test]
fn large_kappa_follows_inverse_law() {
    let kappas = kappa_grid(1.0, 5.0, 20, Spacing::Geometric).unwrap();
    let sweep = sweep_kappa(&ModelParams::default(), &kappas, &SweepSetup::default()).unwrap();
    let periods: Vec<f64> = sweep.rows.iter().map(|r| r.t_ba.unwrap()).collect();
    let fit = fit_inverse_law(&kappas, &periods).unwrap();
    let mean = periods.iter().sum::<f64>() / periods.len() as f64;
    let relative = fit.rms_residual / mean;
    println!("a = {:.4}, relative rms residual = {:.4}", fit.coefficients[0], relative);
    assert!(relative < 0.05, "relative rms residual {relative:.4}");
}
