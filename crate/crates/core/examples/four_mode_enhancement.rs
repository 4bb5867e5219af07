//! Extended model: centered cancellation of the line-mode terms, reduction to
//! the two-mode result, and the circuit-derived enhancement.

use ceasefire::cli;
use ceasefire::four_mode::{self, FourModeParams};
use ceasefire::langevin_core::TwoModeParams;
use ceasefire::scanrate;

fn main() -> ceasefire::Result<()> {
    let tm = TwoModeParams::new(19.0, 110.0, 110.0)?;
    let bare = FourModeParams::from_two_mode(&tm, -1500.0, 1500.0)?;
    println!(
        "uncoupled lines: E4 = {:.8}, two-mode E = {:.8}",
        four_mode::enhancement4(&bare)?.value,
        scanrate::enhancement(&tm)?.value
    );
    let sym = FourModeParams {
        g_cb: 330.0,
        h_cb: 330.0,
        g_db: 330.0,
        h_db: 330.0,
        ..bare
    };
    let r = four_mode::zeta4(0.0, &sym)?;
    println!(
        "centered: zeta_mm(0) = {:.6}, abs zeta_mm_dag(0) = {:.1e}",
        r.zeta_mm.re,
        r.zeta_mm_dag.norm()
    );
    let off = FourModeParams {
        delta_ca: -1400.0,
        delta_da: 1600.0,
        ..sym
    };
    println!(
        "off center by 100 kappa_l: E4 = {:.4}",
        four_mode::enhancement4(&off)?.value
    );

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.toml");
    let cfg = cli::load_config(std::path::Path::new(path))?;
    let (p, _) = cli::resolve_four_mode(&cfg)?;
    let e = four_mode::enhancement4(&p)?;
    println!("reference circuit, centered: p_A = {:.4}, E4 = {:.6}", p.p_a, e.value);
    Ok(())
}
