//! Reflection gain for mismatched swap and squeeze rates, the small-mismatch
//! formulas, and the enhancement as g/h moves through 1.

use ceasefire::langevin_core::TwoModeParams;
use ceasefire::scanrate::{self, MismatchModel};

fn main() -> ceasefire::Result<()> {
    let base = TwoModeParams::new(19.0, 0.0, 0.0)?;
    for (cg, ch) in [(1.0, 0.0), (0.0, 0.999), (2.0, 2.0), (3.0, 1.5)] {
        let m = scanrate::mismatch_reflection(cg, ch, &base)?;
        println!(
            "C_g = {cg:<5} C_h = {ch:<5} |chi_mm(0)|^2 = {:.6e} oscillating = {}",
            m.refl_sq, m.oscillating
        );
    }
    let c = 2500.0;
    for eps in [-1e-4, 0.0, 1e-4, 2e-4] {
        let a = scanrate::mismatch_formulas(c, eps);
        let x = scanrate::mismatch_exact(c, eps, &base)?;
        println!(
            "eps = {eps:>8.1e}: chi_mm(0) approx {:>9.5} exact {:>9.5}",
            a.chi_mm0_approx, x.chi_mm0_approx
        );
    }
    let ratios: Vec<f64> = (0..=20).map(|k| 0.95 + 0.005 * k as f64).collect();
    let sweep = scanrate::mismatch_enhancement_sweep(110.0, 19.0, &ratios, &MismatchModel::TwoMode)?;
    for r in &sweep.rows {
        match r.enhancement {
            Some(e) => println!("g/h = {:.3}  E = {e:.4}", r.ratio),
            None => println!("g/h = {:.3}  oscillating", r.ratio),
        }
    }
    println!("argmax g/h = {:?}", sweep.argmax_ratio);
    Ok(())
}
