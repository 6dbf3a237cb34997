use approx::assert_relative_eq;
use proptest::prelude::*;
use triplet_core::phasematch::{self, DispersionModel, GratingSign, QpmGrating, QpmProcess};

const BRACKET: (f64, f64) = (700e-9, 900e-9);

/// Signal wavelength with the smallest |Δk| on a dense grid.
fn dense_scan(g: &QpmGrating, lp: f64, theta: f64, d: &DispersionModel, n: usize) -> f64 {
    (0..=n)
        .map(|i| BRACKET.0 + (BRACKET.1 - BRACKET.0) * i as f64 / n as f64)
        .min_by(|&a, &b| {
            let f = |ls: f64| {
                let p = QpmProcess::new(lp, ls, theta, *g, d.clone()).unwrap();
                phasematch::phase_mismatch(&p).unwrap().abs()
            };
            f(a).total_cmp(&f(b))
        })
        .unwrap()
}

#[test]
fn solver_agrees_with_dense_scan() {
    let d = DispersionModel::default();
    let g = phasematch::stage1_calibrated(&d).unwrap();
    for theta in [150.0, 163.5, 164.5, 175.0] {
        let s = phasematch::solve_phasematched_signal(532e-9, &g, theta, &d, BRACKET).unwrap();
        let oracle = dense_scan(&g, 532e-9, theta, &d, 20_000);
        assert!((s.lambda_s - oracle).abs() <= 2e-11, "{theta}: {} vs {oracle}", s.lambda_s);
    }
}

#[test]
fn one_degree_shifts_signal_monotonically() {
    let d = DispersionModel::default();
    let g = phasematch::stage1_calibrated(&d).unwrap();
    let at = |t: f64| phasematch::solve_phasematched_signal(532e-9, &g, t, &d, BRACKET).unwrap().lambda_s;
    let base = at(163.5);
    let shifted = at(164.5);
    assert!((shifted - base).abs() > 1e-11);
    let oracle_shift = dense_scan(&g, 532e-9, 164.5, &d, 20_000) - dense_scan(&g, 532e-9, 163.5, &d, 20_000);
    assert_eq!((shifted - base).signum(), oracle_shift.signum());
}

#[test]
fn tuning_curve_is_continuous_and_monotone() {
    let d = DispersionModel::default();
    let g = phasematch::stage1_calibrated(&d).unwrap();
    let curve = phasematch::temperature_tuning_curve(&g, 532e-9, (150.0, 180.0), 61, &d, BRACKET).unwrap();
    let ls: Vec<f64> = curve.iter().map(|p| p.solution.unwrap().lambda_s).collect();
    let steps: Vec<f64> = ls.windows(2).map(|w| w[1] - w[0]).collect();
    let sign = steps[0].signum();
    assert!(steps.iter().all(|s| s.signum() == sign));
    let max = steps.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let min = steps.iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
    assert!(max < 3.0 * min, "uneven steps {min:e}..{max:e}");
    let crosses = ls.windows(2).any(|w| (w[0] - 790.5e-9) * (w[1] - 790.5e-9) <= 0.0);
    assert!(crosses);
}

#[test]
fn toy_grating_is_inverted_exactly() {
    let d = DispersionModel::toy_cauchy();
    for (lp, ls, theta) in [(532e-9, 790.5e-9, 40.0), (600e-9, 1000e-9, 80.0), (450e-9, 700e-9, 25.0)] {
        let g = phasematch::grating_for_process(lp, ls, theta, &d).unwrap();
        let s = phasematch::solve_phasematched_signal(lp, &g, theta, &d, (ls - 100e-9, ls + 60e-9)).unwrap();
        assert_relative_eq!(s.lambda_s, ls, max_relative = 1e-12);
    }
}

#[test]
fn shg_peak_is_constructed_wavelength_for_any_length() {
    let d = DispersionModel::toy_cauchy();
    let g = phasematch::grating_for_process(600e-9, 1200e-9, 50.0, &d).unwrap();
    for length in [1e-3, 5e-3, 20e-3] {
        let p = phasematch::shg_peak_wavelength(&g, 50.0, &d, length, (1190e-9, 1211e-9), 401).unwrap();
        assert_relative_eq!(p.fundamental, 1200e-9, max_relative = 1e-12);
        assert!(p.efficiency > 0.999999 && !p.at_boundary);
    }
}

#[test]
fn shg_peak_at_boundary_is_flagged() {
    let d = DispersionModel::toy_cauchy();
    let g = phasematch::grating_for_process(600e-9, 1200e-9, 50.0, &d).unwrap();
    let p = phasematch::shg_peak_wavelength(&g, 50.0, &d, 1e-5, (1150e-9, 1180e-9), 101).unwrap();
    assert!(p.at_boundary);
}

#[test]
fn acceptance_integral_converges_with_grid() {
    let d = DispersionModel::default();
    let g = phasematch::stage2_calibrated(&d).unwrap();
    let l = phasematch::STAGE2_LENGTH;
    let ab = phasematch::pump_acceptance_bandwidth(
        &g,
        phasematch::CALIBRATION_TEMPERATURE,
        &d,
        l,
        phasematch::acceptance_scan(790.5e-9, l),
        101,
    )
    .unwrap();
    for lp in [ab.degeneracy_pump, ab.degeneracy_pump + 0.3e-9] {
        let r = |n| {
            phasematch::acceptance_response(&g, phasematch::CALIBRATION_TEMPERATURE, &d, l, lp, ab.signal_window, n)
                .unwrap()
        };
        let (coarse, fine) = (r(2000), r(8000));
        assert!((coarse / fine - 1.0).abs() < 0.01, "{lp}: {coarse} vs {fine}");
    }
}

#[test]
fn acceptance_fwhm_near_nominal() {
    let d = DispersionModel::default();
    let g = phasematch::stage2_calibrated(&d).unwrap();
    let l = phasematch::STAGE2_LENGTH;
    let ab = phasematch::pump_acceptance_bandwidth(
        &g,
        phasematch::CALIBRATION_TEMPERATURE,
        &d,
        l,
        phasematch::acceptance_scan(790.5e-9, l),
        401,
    )
    .unwrap();
    assert!((ab.fwhm - 0.749e-9).abs() < 0.02e-9, "{}", ab.fwhm);
    assert!((ab.degeneracy_pump - 790.5e-9).abs() < 1e-13);
    assert!((ab.peak - 790.5e-9).abs() < ab.fwhm);
}

#[test]
fn overlap_properties() {
    assert_relative_eq!(phasematch::spectral_overlap(1.0, 1.0).unwrap(), 1.0);
    let a = phasematch::spectral_overlap(1.579, 0.749).unwrap();
    let b = phasematch::spectral_overlap(0.749, 1.579).unwrap();
    assert_relative_eq!(a, b);
    assert!(a < 1.0);
    let w = phasematch::source_fwhm_for_overlap(a, 0.749).unwrap();
    assert_relative_eq!(w, 1.579, max_relative = 1e-12);
    assert!(phasematch::source_fwhm_for_overlap(0.0, 0.749).is_err());
    assert!(phasematch::spectral_overlap(-1.0, 0.749).is_err());
}

#[test]
fn grating_rejects_bad_period() {
    assert!(QpmGrating::new(0.0, GratingSign::Plus).is_err());
    assert!(QpmGrating::new(f64::NAN, GratingSign::Minus).is_err());
}

proptest! {
    #[test]
    fn energy_conservation_closes(lp in 300e-9f64..1500e-9, r in 1.001f64..20.0) {
        let ls = lp * r;
        let li = phasematch::idler_partner(lp, ls).unwrap();
        prop_assert!((phasematch::recombined_pump(ls, li) / lp - 1.0).abs() <= 1e-12);
        prop_assert!(li > lp);
    }

    #[test]
    fn solver_residual_is_small(theta in 140.0f64..190.0) {
        let d = DispersionModel::default();
        let g = phasematch::stage1_calibrated(&d).unwrap();
        let s = phasematch::solve_phasematched_signal(532e-9, &g, theta, &d, BRACKET).unwrap();
        prop_assert!(s.mismatch.abs() < 1e-3);
        let p = QpmProcess::new(532e-9, s.lambda_s, theta, g, d).unwrap();
        prop_assert!(phasematch::phase_mismatch(&p).unwrap().abs() < 1e-3);
    }

    #[test]
    fn toy_inversion_roundtrip(lp in 450e-9f64..650e-9, r in 1.3f64..1.8, theta in 20.0f64..200.0) {
        let d = DispersionModel::toy_cauchy();
        let ls = lp * r;
        let g = phasematch::grating_for_process(lp, ls, theta, &d).unwrap();
        let s = phasematch::solve_phasematched_signal(lp, &g, theta, &d, (ls - 20e-9, ls + 20e-9)).unwrap();
        prop_assert!((s.lambda_s / ls - 1.0).abs() < 1e-10);
    }
}
