//! Normal modes of the reference circuit seen from its three ports, and the
//! parametric rates they acquire under a 23 % modulation.

use std::f64::consts::PI;

use ceasefire::circuit;
use ceasefire::cli;

fn main() -> ceasefire::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.toml");
    let cfg = cli::load_config(std::path::Path::new(path))?;
    let (spec, drive) = cli::resolve_circuit(&cfg)?;
    let cat = circuit::build_catalog(&spec, spec.default_band())?;
    println!(
        "{:>8} {:>14} {:>10} {:>10} {:>10} {:>12}",
        "label", "f [GHz]", "Za", "Zb", "Ztl", "Q"
    );
    for m in &cat.modes {
        println!(
            "{:>8} {:>14.9} {:>10.3e} {:>10.3e} {:>10.3e} {:>12.4e}",
            format!("{:?}", m.label),
            m.omega / (2e9 * PI),
            m.z_eff_a,
            m.z_eff_b,
            m.z_eff_tl,
            m.q
        );
    }
    println!("p_A = {:.4}, FSR = {:.3} MHz", cat.p_a, cat.fsr / (2e6 * PI));
    let rates = circuit::interaction_rates(&cat, &spec, &drive)?;
    let k = rates.catalog.kappa_l;
    for l in [circuit::ModeLabel::A, circuit::ModeLabel::C, circuit::ModeLabel::D] {
        if let Some(r) = rates.get(l) {
            println!("{l:?}: g = {:.2} kappa_l, h = {:.2} kappa_l", r.g / k, r.h / k);
        }
    }
    for w in &rates.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
