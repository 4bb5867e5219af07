//! Visibility of the parametric readout against a standard haloscope at the
//! reference operating point, and the resulting scan-rate enhancement.

use ceasefire::langevin_core::{self as lc, TwoModeParams, VisibilityMode};
use ceasefire::scanrate;

fn main() -> ceasefire::Result<()> {
    let p = TwoModeParams::new(19.0, 110.0, 110.0)?;
    let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 25.0).collect();
    let cf = lc::visibility(&grid, &p, VisibilityMode::Ceasefire)?;
    let std = lc::visibility(&grid, &p, VisibilityMode::Standard { kappa_c: 2.0 })?;
    println!("{:>10} {:>14} {:>14}", "omega", "alpha_cf", "alpha_std");
    for ((w, a), b) in grid.iter().zip(&cf.alphas).zip(&std.alphas) {
        println!("{w:>10.1} {a:>14.6e} {b:>14.6e}");
    }
    let e = scanrate::enhancement(&p)?;
    println!("E = {:.10} (quadrature error {:.1e})", e.value, e.est_rel_error);
    Ok(())
}
