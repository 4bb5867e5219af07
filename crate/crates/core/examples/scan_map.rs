//! Enhancement over matched rate and overcoupling, its ridge, and the refined
//! optimum at g = h = 110.

use ceasefire::scanrate;

fn main() -> ceasefire::Result<()> {
    let g: Vec<f64> = [10.0, 30.0, 60.0, 110.0, 160.0].to_vec();
    let ratios: Vec<f64> = (1..=40).map(|k| 2.5 * k as f64).collect();
    let map = scanrate::enhancement_map(&g, &ratios)?;
    for r in &map.ridge {
        println!(
            "g = {:>6.1}  best kappa_m = {:>6.1}  E = {:.4}",
            r.g, r.ratio_opt, r.e_opt
        );
    }
    let opt = scanrate::optimize_overcoupling(110.0, 1.0, [1.0, 1000.0])?;
    println!(
        "refined at g = 110: kappa_m = {:.4}, E = {:.6}, on boundary: {}",
        opt.kappa_m_opt, opt.e_opt, opt.at_boundary
    );
    Ok(())
}
