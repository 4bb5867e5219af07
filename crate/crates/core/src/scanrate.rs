//! Scan-rate enhancement: the ratio of `∫α² dω` for the parametric readout to
//! that of a twice-overcoupled standard haloscope, plus the overcoupling
//! optimum and the sensitivity to mismatched interaction rates.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::four_mode::{self, FourModeParams};
use crate::langevin_core::{self as lc, TwoModeParams, DIVERGENCE_THRESHOLD};
use crate::quadrature::{integrate_line, LineIntegral, WindowSpec};

/// Default relative tolerance of the enhancement integrals.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest quadrature error estimate accepted for a reported enhancement.
pub const ACCEPTED_REL_ERROR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnhancementResult {
    pub value: f64,
    pub integral_cf: f64,
    pub integral_std: f64,
    pub integration_window: f64,
    pub est_rel_error: f64,
}

/// `∫ α(ω)² dω` over the real line, with `curve_fn` returning `α`.
pub fn integrate_alpha_sq<F>(curve_fn: F, tol: f64, window: &WindowSpec) -> Result<LineIntegral>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(tol > 1e-12 && tol < 1e-2) {
        return Err(Error::invalid("tol", format!("must lie in (1e-12, 1e-2), got {tol}")));
    }
    integrate_line(|w| curve_fn(w).map(|a| a * a), tol, window)
}

/// Starting window for a two-mode curve: `50·max(κ_ℓ, κ_m, 4g²/κ_m)`.
pub fn two_mode_window(p: &TwoModeParams) -> WindowSpec {
    let gain_bw = if p.kappa_m > 0.0 {
        4.0 * p.g.max(p.h).powi(2) / p.kappa_m
    } else {
        0.0
    };
    WindowSpec {
        start: 50.0 * p.kappa_l.max(p.kappa_m).max(gain_bw),
        breakpoints: vec![0.0],
    }
}

/// Standard-haloscope reference integral at twofold overcoupling `κ_c = 2κ_ℓ`.
pub fn standard_integral(p: &TwoModeParams, tol: f64) -> Result<LineIntegral> {
    let kappa_c = 2.0 * p.kappa_l;
    let window = WindowSpec {
        start: 50.0 * (kappa_c + p.kappa_l),
        breakpoints: vec![0.0],
    };
    integrate_alpha_sq(|w| Ok(lc::alpha_standard(w, kappa_c, p)), tol, &window)
}

pub(crate) fn ratio(cf: LineIntegral, std: LineIntegral, scale: f64) -> Result<EnhancementResult> {
    let est_rel_error = cf.est_rel_error + std.est_rel_error;
    if est_rel_error >= ACCEPTED_REL_ERROR {
        return Err(Error::QuadratureTolerance {
            estimate: est_rel_error,
        });
    }
    Ok(EnhancementResult {
        value: scale * cf.value / std.value,
        integral_cf: cf.value,
        integral_std: std.value,
        integration_window: cf.window,
        est_rel_error,
    })
}

pub fn enhancement(p: &TwoModeParams) -> Result<EnhancementResult> {
    enhancement_with_tol(p, DEFAULT_TOL)
}

pub fn enhancement_with_tol(p: &TwoModeParams, tol: f64) -> Result<EnhancementResult> {
    let p = p.validated()?;
    if beta_at_zero(&p) <= DIVERGENCE_THRESHOLD {
        return Err(Error::ParametricDivergence {
            omega: 0.0,
            quantity: "beta",
            magnitude: beta_at_zero(&p).abs(),
        });
    }
    let cf = integrate_alpha_sq(|w| lc::alpha_ceasefire(w, &p), tol, &two_mode_window(&p))?;
    let std = standard_integral(&p, tol)?;
    ratio(cf, std, 1.0)
}

fn beta_at_zero(p: &TwoModeParams) -> f64 {
    lc::beta(0.0, p).re
}

fn matched(kappa_l: f64, kappa_m: f64, g: f64) -> Result<TwoModeParams> {
    TwoModeParams {
        kappa_l,
        kappa_m,
        kappa_a: 1e-6 * kappa_l,
        g,
        h: g,
        phi: 0.0,
        n_t: 0.0,
        n_a: 1.0,
    }
    .validated()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvercouplingOptimum {
    pub kappa_m_opt: f64,
    pub e_opt: f64,
    /// The maximum sits on an edge of the search range.
    pub at_boundary: bool,
    /// Coarse grid `(κ_m, E)` used to bracket the maximum.
    pub grid: Vec<(f64, f64)>,
}

/// Maximizes `E` over `κ_m` at matched rates `g = h`: a logarithmic grid
/// brackets the peak, then golden-section search refines it in `ln κ_m`.
pub fn optimize_overcoupling(g_equals_h: f64, kappa_l: f64, search_range: [f64; 2]) -> Result<OvercouplingOptimum> {
    const GRID: usize = 33;
    let [lo, hi] = search_range;
    if !(g_equals_h > 0.0) {
        return Err(Error::invalid("g_equals_h", "must be > 0"));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("search_range", "must satisfy 0 < lo < hi"));
    }
    let e_at = |ln_km: f64| -> Result<f64> { Ok(enhancement(&matched(kappa_l, ln_km.exp(), g_equals_h)?)?.value) };

    let (a, b) = (lo.ln(), hi.ln());
    let grid: Vec<(f64, f64)> = (0..GRID)
        .into_par_iter()
        .map(|i| {
            let x = a + (b - a) * i as f64 / (GRID - 1) as f64;
            e_at(x).map(|e| (x, e))
        })
        .collect::<Result<_>>()?;
    let best = argmax(grid.iter().map(|&(_, e)| e)).expect("grid is not empty");
    let at_boundary = best == 0 || best == GRID - 1;

    let (mut x0, mut x1) = (grid[best.saturating_sub(1)].0, grid[(best + 1).min(GRID - 1)].0);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = x1 - r * (x1 - x0);
    let mut d = x0 + r * (x1 - x0);
    let (mut fc, mut fd) = (e_at(c)?, e_at(d)?);
    while x1 - x0 > 1e-7 {
        if fc > fd {
            x1 = d;
            d = c;
            fd = fc;
            c = x1 - r * (x1 - x0);
            fc = e_at(c)?;
        } else {
            x0 = c;
            c = d;
            fc = fd;
            d = x0 + r * (x1 - x0);
            fd = e_at(d)?;
        }
    }
    let (mut x, mut e) = if fc > fd { (c, fc) } else { (d, fd) };
    if grid[best].1 > e {
        (x, e) = grid[best];
    }
    Ok(OvercouplingOptimum {
        kappa_m_opt: x.exp(),
        e_opt: e,
        at_boundary,
        grid: grid.into_iter().map(|(x, e)| (x.exp(), e)).collect(),
    })
}

fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    values
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapCell {
    pub g: f64,
    pub ratio: f64,
    /// `None` where the cell is at or past the oscillation threshold.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgePoint {
    pub g: f64,
    pub ratio_opt: f64,
    pub e_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnhancementMap {
    pub g_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    /// Row-major: one row per `g`.
    pub cells: Vec<MapCell>,
    /// Grid argmax over `κ_m/κ_ℓ` for every `g` with a nonzero maximum.
    pub ridge: Vec<RidgePoint>,
}

/// `E` on a grid of matched rates `g = h` (in `κ_ℓ`) and overcoupling ratios `κ_m/κ_ℓ`.
pub fn enhancement_map(g_grid: &[f64], ratio_grid: &[f64]) -> Result<EnhancementMap> {
    if g_grid.is_empty() || ratio_grid.is_empty() {
        return Err(Error::invalid("grid", "g and ratio grids must be nonempty"));
    }
    let cells: Vec<MapCell> = g_grid
        .iter()
        .flat_map(|&g| ratio_grid.iter().map(move |&r| (g, r)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(g, ratio)| {
            let value = match matched(1.0, ratio, g).and_then(|p| enhancement(&p)) {
                Ok(e) => Some(e.value),
                Err(Error::ParametricDivergence { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(MapCell { g, ratio, value })
        })
        .collect::<Result<_>>()?;
    let ridge = cells
        .chunks(ratio_grid.len())
        .filter_map(|row| {
            let i = argmax(row.iter().map(|c| c.value.unwrap_or(f64::NAN)))?;
            let e_opt = row[i].value?;
            (e_opt > 0.0).then(|| RidgePoint {
                g: row[i].g,
                ratio_opt: row[i].ratio,
                e_opt,
            })
        })
        .collect();
    Ok(EnhancementMap {
        g_grid: g_grid.to_vec(),
        ratio_grid: ratio_grid.to_vec(),
        cells,
        ridge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchPoint {
    pub c_g: f64,
    pub c_h: f64,
    /// `(g − h)/g₀` with the reference rate `g₀ = h`; infinite when only `g` is on.
    pub epsilon: f64,
    /// `χ_mm(0)`, real on resonance.
    pub chi_mm0: f64,
    pub refl_sq: f64,
    pub oscillating: bool,
}

/// On-resonance reflection for rates given as cooperativities
/// `C_g = 4g²/(κ_mκ_ℓ)` and `C_h = 4h²/(κ_mκ_ℓ)`.
pub fn mismatch_reflection(c_g: f64, c_h: f64, p_base: &TwoModeParams) -> Result<MismatchPoint> {
    if !(c_g >= 0.0 && c_h >= 0.0) {
        return Err(Error::invalid("cooperativity", "c_g and c_h must be >= 0"));
    }
    let scale = p_base.kappa_m * p_base.kappa_l / 4.0;
    let g = (c_g * scale).sqrt();
    let h = (c_h * scale).sqrt();
    let epsilon = match (g > 0.0, h > 0.0) {
        (_, true) => (g - h) / h,
        (true, false) => f64::INFINITY,
        (false, false) => 0.0,
    };
    // β(0) = (κ_mκ_ℓ/4)(1 + C_g − C_h)
    let b0 = scale * (1.0 + c_g - c_h);
    let oscillating = b0 <= DIVERGENCE_THRESHOLD;
    let chi_mm0 = if b0 == 0.0 {
        f64::INFINITY
    } else {
        1.0 - 2.0 * scale / b0
    };
    Ok(MismatchPoint {
        c_g,
        c_h,
        epsilon,
        chi_mm0,
        refl_sq: chi_mm0 * chi_mm0,
        oscillating,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchApprox {
    pub chi_mm0_approx: f64,
    pub alpha0_approx_over_alphabar: f64,
}

/// Small-mismatch forms `χ_mm(0) ≈ 1 − 2/(2Cε + 1)` and `α(0)/ᾱ ≈ 1/(Cε²/4 + 1)`.
pub fn mismatch_formulas(c: f64, epsilon: f64) -> MismatchApprox {
    MismatchApprox {
        chi_mm0_approx: 1.0 - 2.0 / (2.0 * c * epsilon + 1.0),
        alpha0_approx_over_alphabar: 1.0 / (c * epsilon * epsilon / 4.0 + 1.0),
    }
}

/// Exact counterparts of [`mismatch_formulas`] with `h = g₀`, `g = g₀(1 + ε)`
/// and `C = 4g₀²/(κ_mκ_ℓ)`.
pub fn mismatch_exact(c: f64, epsilon: f64, p_base: &TwoModeParams) -> Result<MismatchApprox> {
    let g0 = (c * p_base.kappa_m * p_base.kappa_l / 4.0).sqrt();
    let p = TwoModeParams {
        g: g0 * (1.0 + epsilon),
        h: g0,
        ..*p_base
    }
    .validated()?;
    let chi = lc::susceptibilities(0.0, &p)?.chi_mm.re;
    let alphabar = 2.0 * p.kappa_a * p.n_a / p.kappa_l;
    Ok(MismatchApprox {
        chi_mm0_approx: chi,
        alpha0_approx_over_alphabar: lc::alpha_ceasefire(0.0, &p)? / alphabar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MismatchModel {
    TwoMode,
    FourMode(FourModeParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchRow {
    pub ratio: f64,
    pub epsilon: f64,
    pub oscillating: bool,
    pub enhancement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchSweep {
    pub rows: Vec<MismatchRow>,
    pub argmax_ratio: Option<f64>,
}

/// `E` versus `g/h` at fixed `h`. Cells at or past the oscillation threshold
/// (`β(0) ≤ 0` for the cavity–readout pair) are flagged and carry no value.
pub fn mismatch_enhancement_sweep(
    h_fixed: f64,
    kappa_m: f64,
    ratio_grid: &[f64],
    model: &MismatchModel,
) -> Result<MismatchSweep> {
    if ratio_grid.is_empty() {
        return Err(Error::invalid("ratio_grid", "must not be empty"));
    }
    let rows: Vec<MismatchRow> = ratio_grid
        .par_iter()
        .map(|&ratio| {
            let g = ratio * h_fixed;
            let epsilon = ratio - 1.0;
            let kappa_l = match model {
                MismatchModel::TwoMode => 1.0,
                MismatchModel::FourMode(t) => t.kappa_l,
            };
            let oscillating = kappa_m * kappa_l / 4.0 + g * g - h_fixed * h_fixed <= DIVERGENCE_THRESHOLD;
            let enhancement = if oscillating {
                None
            } else {
                Some(match model {
                    MismatchModel::TwoMode => enhancement(&TwoModeParams::new(kappa_m, g, h_fixed)?)?.value,
                    MismatchModel::FourMode(t) => {
                        let p = FourModeParams {
                            kappa_m,
                            g_ab: g,
                            h_ab: h_fixed,
                            ..*t
                        };
                        four_mode::enhancement4(&p)?.value
                    }
                })
            };
            Ok(MismatchRow {
                ratio,
                epsilon,
                oscillating,
                enhancement,
            })
        })
        .collect::<Result<_>>()?;
    let argmax_ratio = argmax(rows.iter().map(|r| r.enhancement.unwrap_or(f64::NAN))).map(|i| rows[i].ratio);
    Ok(MismatchSweep { rows, argmax_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn standard_integral_closed_form() {
        // α_0 = n_a κ_c κ_a/((ω² + b²)(n_T+½)), b = (κ_c+κ_ℓ)/2, and ∫(A/(ω²+b²))² = πA²/(2b³)
        let p = TwoModeParams::new(19.0, 0.0, 0.0).unwrap().with_thermal(0.7).unwrap();
        let a = p.n_a * 2.0 * p.kappa_a / (p.n_t + 0.5);
        let b: f64 = 1.5;
        let expect = PI * a * a / (2.0 * b.powi(3));
        let got = standard_integral(&p, 1e-10).unwrap();
        assert_relative_eq!(got.value, expect, max_relative = 1e-9);
    }

    #[test]
    fn no_coupling_no_enhancement() {
        let e = enhancement(&TwoModeParams::new(19.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn integral_scales_with_signal_squared() {
        let p = TwoModeParams::new(19.0, 20.0, 20.0).unwrap();
        let q = p.with_axion(p.kappa_a, 2.0).unwrap();
        let w = two_mode_window(&p);
        let a = integrate_alpha_sq(|x| lc::alpha_ceasefire(x, &p), 1e-10, &w).unwrap();
        let b = integrate_alpha_sq(|x| lc::alpha_ceasefire(x, &q), 1e-10, &w).unwrap();
        assert_relative_eq!(b.value / a.value, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn tolerance_range_is_enforced() {
        let w = WindowSpec {
            start: 1.0,
            breakpoints: vec![],
        };
        assert!(integrate_alpha_sq(|_| Ok(0.0), 0.1, &w).is_err());
        assert!(integrate_alpha_sq(|_| Ok(0.0), 1e-13, &w).is_err());
    }

    #[test]
    fn halving_tol_is_within_estimate() {
        let p = TwoModeParams::new(19.0, 110.0, 110.0).unwrap();
        let a = enhancement_with_tol(&p, 1e-8).unwrap();
        let b = enhancement_with_tol(&p, 5e-9).unwrap();
        assert!(((a.value - b.value) / b.value).abs() < a.est_rel_error);
    }

    #[test]
    fn divergent_parameters_error() {
        let p = TwoModeParams::new(4.0, 0.0, 1.5).unwrap();
        assert!(matches!(enhancement(&p), Err(Error::ParametricDivergence { .. })));
    }

    #[test]
    fn mismatch_examples() {
        let base = TwoModeParams::new(19.0, 0.0, 0.0).unwrap();
        assert!(mismatch_reflection(1.0, 0.0, &base).unwrap().refl_sq < 1e-28);
        let m = mismatch_reflection(0.0, 0.999, &base).unwrap();
        assert_relative_eq!(m.chi_mm0, -1999.0, max_relative = 1e-9);
        assert!(!m.oscillating);
        for c in [0.0, 0.3, 2500.0] {
            let m = mismatch_reflection(c, c, &base).unwrap();
            assert_relative_eq!(m.refl_sq, 1.0, epsilon = 1e-12);
        }
        assert!(mismatch_reflection(0.0, 1.0, &base).unwrap().oscillating);
        assert!(mismatch_reflection(1.0, 2.5, &base).unwrap().oscillating);
        assert!(mismatch_reflection(-1.0, 0.0, &base).is_err());
    }

    #[test]
    fn mismatch_formula_limits() {
        let a = mismatch_formulas(2500.0, 0.0);
        assert_eq!(a.chi_mm0_approx, -1.0);
        assert_eq!(a.alpha0_approx_over_alphabar, 1.0);
        assert_eq!(mismatch_formulas(2500.0, 1.0 / 5000.0).chi_mm0_approx, 0.0);
    }

    #[test]
    fn small_mismatch_converges_with_cooperativity() {
        let base = TwoModeParams::new(19.0, 0.0, 0.0).unwrap();
        let worst = |c: f64| {
            (-10..=10)
                .map(|k| k as f64 / 10.0 / (4.0 * c))
                .map(|eps| {
                    let a = mismatch_formulas(c, eps).chi_mm0_approx;
                    let e = mismatch_exact(c, eps, &base).unwrap().chi_mm0_approx;
                    ((a - e) / e).abs()
                })
                .fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [10.0, 100.0, 2500.0].into_iter().map(worst).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn optimizer_rejects_bad_input() {
        assert!(optimize_overcoupling(0.0, 1.0, [1.0, 10.0]).is_err());
        assert!(optimize_overcoupling(1.0, 1.0, [10.0, 1.0]).is_err());
    }

    #[test]
    fn map_zero_row_and_oscillation_free() {
        let m = enhancement_map(&[0.0, 5.0], &[1.0, 4.0]).unwrap();
        assert!(m.cells[..2].iter().all(|c| c.value == Some(0.0)));
        assert_eq!(m.ridge.len(), 1);
        assert_eq!(m.ridge[0].g, 5.0);
    }
}
