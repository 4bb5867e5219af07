//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// abscissae and weights to 33 digits, as tabulated
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = hw * XGK[j];
        let s = f(c - x)? + f(c + x)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    let value = k * hw;
    let error = ((k - g) * hw).abs();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint inside the
/// interval and then bisecting the panel with the largest error estimate until
/// the total error falls below `max(abs_tol, rel_tol·|value|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], rel_tol: f64, abs_tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_PANELS: usize = 4000;
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        heap.push(kronrod(&mut f, w[0], w[1])?);
    }
    let total =
        |h: &BinaryHeap<Panel>| -> (f64, f64) { h.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error)) };
    loop {
        let (value, abs_error) = total(&heap);
        if abs_error <= abs_tol.max(rel_tol * value.abs()) || heap.len() >= MAX_PANELS {
            return Ok(Integral { value, abs_error });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            let (value, abs_error) = total(&heap);
            return Ok(Integral { value, abs_error });
        }
        heap.push(kronrod(&mut f, worst.a, mid)?);
        heap.push(kronrod(&mut f, mid, worst.b)?);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    /// Initial half-width of the symmetric window.
    pub start: f64,
    /// Points where the integrand has sharp features.
    pub breakpoints: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub est_rel_error: f64,
    /// Half-width of the window finally used.
    pub window: f64,
}

/// Integrates `f` over the real line through a symmetric window that doubles
/// until the two newly added outer panels contribute less than `tol` of the
/// running total.
pub fn integrate_line<F>(mut f: F, tol: f64, window: &WindowSpec) -> Result<LineIntegral>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_DOUBLINGS: usize = 40;
    let inner_tol = 0.1 * tol;
    let mut w = window.start;
    let inner = integrate(&mut f, -w, w, &window.breakpoints, inner_tol, 0.0)?;
    let mut value = inner.value;
    let mut err = inner.abs_error;
    for _ in 0..MAX_DOUBLINGS {
        let lo = integrate(&mut f, -2.0 * w, -w, &window.breakpoints, inner_tol, 0.0)?;
        let hi = integrate(&mut f, w, 2.0 * w, &window.breakpoints, inner_tol, 0.0)?;
        let outer = lo.value + hi.value;
        value += outer;
        err += lo.abs_error + hi.abs_error;
        w *= 2.0;
        if !value.is_finite() {
            return Err(Error::WindowExpansion { window: w });
        }
        if outer.abs() <= tol * value.abs() {
            // the remaining tail of an ω⁻⁴ integrand is about outer/7
            let tail = outer.abs() / 7.0;
            let est_rel_error = if value == 0.0 { 0.0 } else { (err + tail) / value.abs() };
            return Ok(LineIntegral {
                value,
                est_rel_error,
                window: w,
            });
        }
    }
    Err(Error::WindowExpansion { window: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Ok(x.powi(6) - 2.0 * x), 0.0, 2.0, &[], 1e-14, 0.0).unwrap();
        assert_relative_eq!(r.value, 128.0 / 7.0 - 4.0, max_relative = 1e-14);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let r = integrate(|x: f64| Ok(x.abs()), -1.0, 3.0, &[0.0], 1e-13, 0.0).unwrap();
        assert_relative_eq!(r.value, 5.0, max_relative = 1e-13);
    }

    #[test]
    fn lorentzian_squared() {
        // ∫ k⁴/(k²/4+ω²)² dω = 4πk
        for k in [0.3, 1.0, 7.0] {
            let win = WindowSpec {
                start: 50.0 * k,
                breakpoints: vec![0.0],
            };
            let r = integrate_line(|w| Ok(k.powi(4) / (k * k / 4.0 + w * w).powi(2)), 1e-10, &win).unwrap();
            assert_relative_eq!(r.value, 4.0 * PI * k, max_relative = 1e-9);
            assert!(r.est_rel_error < 1e-8);
        }
    }

    #[test]
    fn zero_integrand() {
        let win = WindowSpec {
            start: 1.0,
            breakpoints: vec![],
        };
        let r = integrate_line(|_| Ok(0.0), 1e-9, &win).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.est_rel_error, 0.0);
    }

    #[test]
    fn non_decaying_integrand_fails() {
        let win = WindowSpec {
            start: 1.0,
            breakpoints: vec![],
        };
        assert!(matches!(
            integrate_line(|_| Ok(1.0), 1e-9, &win),
            Err(Error::WindowExpansion { .. })
        ));
    }

    #[test]
    fn errors_propagate() {
        let r = integrate(|_| Err(Error::SingularSystem { omega: 0.0 }), 0.0, 1.0, &[], 1e-9, 0.0);
        assert!(r.is_err());
    }
}
