//! Enhancement as the cavity is tuned across one free spectral range of the
//! reference line, with every parameter recomputed from the circuit.

use std::f64::consts::PI;

use ceasefire::cli;
use ceasefire::four_mode;

fn main() -> ceasefire::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.toml");
    let cfg = cli::load_config(std::path::Path::new(path))?;
    let (spec, drive) = cli::resolve_circuit(&cfg)?;
    let f0 = spec.cavity_omega() / (2.0 * PI);
    let grid = cli::bare_grid(f0, 1.2 * spec.fsr_hz(), 61);
    let pts = four_mode::circuit_detuning_sweep(&spec, &drive, &grid)?;
    for p in &pts {
        match (p.enhancement, &p.flag) {
            (Some(e), _) => println!(
                "delta_A = {:>9.3} MHz  p_A = {:.3}  E4 = {e:.4}",
                p.delta_a_hz / 1e6,
                p.p_a
            ),
            (None, Some(f)) => println!("f_bare = {:.4} GHz  flagged: {f}", p.f_bare / 1e9),
            (None, None) => {}
        }
    }
    match cli::circuit_window_average(&pts, 50e6) {
        Some(avg) => println!("mean over 100 MHz around the midpoint: {avg:.4}"),
        None => println!("window not covered"),
    }
    Ok(())
}
