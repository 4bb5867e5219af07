//! Rebuilds the reference circuit from its design targets: cavity loss rate
//! 100 kHz, readout loss 19 times that, cavity centered between line modes.
//! Prints a `[circuit]` section ready for the config file.

use std::f64::consts::PI;

use ceasefire::circuit::{self, CalibrationTargets, Cavity, CircuitSpec, DriveSpec, Ladder, Line, Readout, C0};
use ceasefire::cli::CircuitConfig;
use ceasefire::four_mode;

fn main() -> ceasefire::Result<()> {
    let line = Line { length: 0.5, v: C0 };
    let (wa, wb, l0) = (2.0 * PI * 5.31e9, 2.0 * PI * 7.05e9, 0.5e-9);
    let mut spec = CircuitSpec {
        cavity: Cavity {
            l_a: 100.0 / wa,
            c_a: 1.0 / (100.0 * wa),
            c_c: 3.0e-14,
            r_a: 1e6,
        },
        ladder: Ladder::from_line(50.0, 400, &line),
        readout: Readout {
            l0,
            c_b: 1.0 / (wb * wb * l0),
            r_b: 1e5,
        },
        line,
    }
    .validated()?;
    let drive = DriveSpec::new(0.23, 0.23, 0.0)?;
    let targets = CalibrationTargets {
        kappa_l_target: 2.0 * PI * 100e3,
        p_a_min: 0.5,
    };
    for _ in 0..2 {
        spec = four_mode::center_cavity(&spec, &drive)?;
        let cal = circuit::calibrate(&spec, &targets)?;
        println!(
            "R_A = {:.6e} ohm after {} iterations (p_A = {:.4})",
            cal.spec.cavity.r_a, cal.iterations, cal.p_a
        );
        spec = cal.spec;
        spec.readout.r_b = 1.0 / (19.0 * cal.kappa_l * spec.readout.c_b);
    }
    spec = four_mode::center_cavity(&spec, &drive)?;
    let d = four_mode::params_from_circuit(&spec, &drive, spec.default_band())?;
    println!(
        "g_AB = {:.2}, g_CB = {:.2}, g_DB = {:.2}, kappa_m = {:.3}, p_A = {:.4}",
        d.params.g_ab, d.params.g_cb, d.params.g_db, d.params.kappa_m, d.params.p_a
    );
    let toml = toml::to_string(&CircuitConfig::from_spec(&spec)).expect("plain numbers serialize");
    println!("\n[circuit]\n{toml}");
    Ok(())
}
