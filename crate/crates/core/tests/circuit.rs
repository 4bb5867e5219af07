//! Circuit backend on the reference design.

use std::f64::consts::PI;
use std::path::Path;

use ceasefire::circuit::{self, Bridge, CalibrationTargets, CircuitSpec, DriveSpec, ModeLabel};
use ceasefire::cli;
use ceasefire::four_mode;

fn reference() -> (CircuitSpec, DriveSpec) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    cli::resolve_circuit(&cli::load_config(&path).unwrap()).unwrap()
}

fn kappa_with(spec: &CircuitSpec, r_a: f64) -> f64 {
    let mut s = *spec;
    s.cavity.r_a = r_a;
    circuit::build_catalog(&s, s.default_band()).unwrap().kappa_l
}

#[test]
fn calibration_matches_bisection() {
    let (spec, _) = reference();
    let target = 2.0 * PI * 150e3;
    let cal = circuit::calibrate(
        &spec,
        &CalibrationTargets {
            kappa_l_target: target,
            p_a_min: 0.5,
        },
    )
    .unwrap();
    assert!(cal.iterations < 20, "{} iterations", cal.iterations);

    // oracle: bisection on log R_A, κ falls as R_A grows
    let (mut lo, mut hi) = (1e5f64.ln(), 1e8f64.ln());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if kappa_with(&spec, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = (0.5 * (lo + hi)).exp();
    assert!(
        (cal.spec.cavity.r_a / r - 1.0).abs() < 1e-3,
        "{} vs {r}",
        cal.spec.cavity.r_a
    );
    assert!((cal.kappa_l / target - 1.0).abs() < 1e-6);
}

#[test]
fn loss_rate_is_inverse_in_resistance() {
    let (spec, _) = reference();
    let r = spec.cavity.r_a;
    let ratio = kappa_with(&spec, r) / kappa_with(&spec, 2.0 * r);
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}

#[test]
fn reference_rates_and_regressions() {
    let (spec, drive) = reference();
    let d = four_mode::params_from_circuit(&spec, &drive, spec.default_band()).unwrap();
    let p = d.params;
    assert!((p.g_ab / 110.0 - 1.0).abs() < 0.2, "g_AB = {}", p.g_ab);
    assert!((p.kappa_m / 19.0 - 1.0).abs() < 0.01, "kappa_m = {}", p.kappa_m);
    assert!((d.kappa_l / (2.0 * PI * 100e3) - 1.0).abs() < 1e-3);
    // line modes sit about three times more strongly at the line port than the cavity
    assert!(p.g_cb > 2.0 * p.g_ab && p.g_db > 2.0 * p.g_ab);
    // frozen values of the reference design
    assert!((p.g_ab / 110.2399 - 1.0).abs() < 1e-5, "{}", p.g_ab);
    assert!((p.p_a / 0.853802 - 1.0).abs() < 1e-5, "{}", p.p_a);
    let e = four_mode::enhancement4(&p).unwrap().value;
    assert!((e / 15.6 - 1.0).abs() < 0.15, "{e}");
    assert!((e / 14.960895245804 - 1.0).abs() < 1e-6, "{e}");
    assert!(!d.warnings.is_empty(), "0.46 total modulation should warn");
}

#[test]
fn reference_is_centered() {
    let (spec, drive) = reference();
    // centering holds for the bridge as renormalized by the drive
    let band = spec.default_band();
    let cat = circuit::build_catalog_with(&spec, Bridge::averaged(&drive), band, spec.default_grid(band)).unwrap();
    let off = four_mode::midpoint_offset(&cat);
    assert!(off.abs() < 1e-6 * cat.fsr, "{off}");
    assert_eq!(cat.c().label, ModeLabel::C);
    assert!(cat.c().omega < cat.a().omega && cat.a().omega < cat.d().omega);
}

#[test]
fn free_spectral_range_follows_line_length() {
    let (spec, _) = reference();
    let fsr = |len: f64| {
        let s = spec.with_line_length(len).unwrap();
        circuit::build_catalog(&s, s.default_band()).unwrap().fsr
    };
    let ratio = fsr(0.5) / fsr(0.7);
    assert!((ratio / 1.4 - 1.0).abs() < 0.01, "{ratio}");
}

#[test]
fn ladder_spacing_converges_with_cell_count() {
    let (spec, _) = reference();
    let sp: Vec<f64> = [100, 200, 400, 800]
        .into_iter()
        .map(|n| {
            let s = spec.with_cells(n).unwrap();
            circuit::build_catalog(&s, s.default_band()).unwrap().fsr
        })
        .collect();
    let d: Vec<f64> = sp.windows(2).map(|w| (w[1] - w[0]).abs() / w[1]).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
}

#[test]
fn length_sweep_peaks_stay_comparable() {
    let (spec, drive) = reference();
    let f0 = spec.cavity_omega() / (2.0 * PI);
    let grid = cli::bare_grid(f0, 2.0 * spec.fsr_hz(), 81);
    let ls = four_mode::length_sweep(&spec, &drive, &[0.5, 0.6, 0.7], &grid).unwrap();
    let peaks: Vec<f64> = ls.curves.iter().map(|c| c.peak.unwrap().1).collect();
    for p in &peaks {
        assert!((p / peaks[0] - 1.0).abs() < 0.15, "{peaks:?}");
    }
    assert!(ls.envelope.len() >= 3);
}

#[test]
fn centered_sweep_is_flagged_near_line_modes() {
    let (spec, drive) = reference();
    let f0 = spec.cavity_omega() / (2.0 * PI);
    let pts = four_mode::circuit_detuning_sweep(&spec, &drive, &cli::bare_grid(f0, 1.2 * spec.fsr_hz(), 41)).unwrap();
    assert!(pts.iter().any(|p| p.flag.is_some()));
    let mid = &pts[20];
    assert!(mid.enhancement.unwrap() > 14.0);
}
