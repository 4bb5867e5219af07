//! Two-mode frequency-domain model: a lossy cavity `A` parametrically coupled
//! to a strongly overcoupled readout mode `B`.
//!
//! Rates are measured in units of the cavity's intrinsic damping, so `kappa_l`
//! is normally 1. `kappa_l` is the total intrinsic damping of the cavity; the
//! weak axion port `kappa_a` is one part of it and the remaining
//! `kappa_l - kappa_a` is the loss port. The axion port carries the thermal
//! occupation `n_t` plus the signal excess `n_a`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{self, LinearNetwork, Port};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Magnitude below which `β` (or `η`) counts as a parametric pole.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-12;

/// Largest admissible `kappa_a / kappa_l`.
pub const WEAK_PORT_LIMIT: f64 = 1e-3;

fn default_one() -> f64 {
    1.0
}
fn default_kappa_a() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoModeParams {
    #[serde(default = "default_one")]
    pub kappa_l: f64,
    pub kappa_m: f64,
    #[serde(default = "default_kappa_a")]
    pub kappa_a: f64,
    pub g: f64,
    pub h: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub n_t: f64,
    #[serde(default = "default_one")]
    pub n_a: f64,
}

impl TwoModeParams {
    /// Parameters with `kappa_l = 1`, `kappa_a = 1e-6`, `n_a = 1`, `n_t = 0`, `phi = 0`.
    pub fn new(kappa_m: f64, g: f64, h: f64) -> Result<Self> {
        TwoModeParams {
            kappa_l: 1.0,
            kappa_m,
            kappa_a: default_kappa_a(),
            g,
            h,
            phi: 0.0,
            n_t: 0.0,
            n_a: 1.0,
        }
        .validated()
    }

    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        self.phi = phi;
        self.validated()
    }

    pub fn with_thermal(mut self, n_t: f64) -> Result<Self> {
        self.n_t = n_t;
        self.validated()
    }

    pub fn with_axion(mut self, kappa_a: f64, n_a: f64) -> Result<Self> {
        self.kappa_a = kappa_a;
        self.n_a = n_a;
        self.validated()
    }

    pub fn with_kappa_l(mut self, kappa_l: f64) -> Result<Self> {
        self.kappa_l = kappa_l;
        self.validated()
    }

    /// Checks the invariants and wraps `phi` into `[0, 2π)`.
    pub fn validated(mut self) -> Result<Self> {
        let named = [
            ("kappa_l", self.kappa_l),
            ("kappa_m", self.kappa_m),
            ("kappa_a", self.kappa_a),
            ("g", self.g),
            ("h", self.h),
            ("phi", self.phi),
            ("n_t", self.n_t),
            ("n_a", self.n_a),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
            if name != "phi" && v < 0.0 {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if self.kappa_l <= 0.0 {
            return Err(Error::invalid("kappa_l", "must be > 0"));
        }
        if self.kappa_a >= WEAK_PORT_LIMIT * self.kappa_l {
            return Err(Error::invalid(
                "kappa_a",
                format!("must be below {WEAK_PORT_LIMIT:e} kappa_l, got {}", self.kappa_a),
            ));
        }
        self.phi = self.phi.rem_euclid(2.0 * PI);
        Ok(self)
    }

    /// Matched cooperativity `4 g² / (κ_m κ_ℓ)`.
    pub fn cooperativity(&self) -> f64 {
        4.0 * self.g * self.g / (self.kappa_m * self.kappa_l)
    }

    /// Rate of the loss port: intrinsic damping not carried by the axion port.
    pub fn kappa_loss(&self) -> f64 {
        self.kappa_l - self.kappa_a
    }
}

/// Quadrature angle, reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct QuadratureAngle(f64);

impl QuadratureAngle {
    pub fn new(theta: f64) -> Self {
        QuadratureAngle(theta.rem_euclid(2.0 * PI))
    }

    /// The amplified quadrature `θ = φ/2`.
    pub fn amplified(p: &TwoModeParams) -> Self {
        Self::new(p.phi / 2.0)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub chi_ma: Complex64,
    pub chi_ml: Complex64,
    pub chi_mm: Complex64,
}

/// Scattering map between the six port fields, ordered
/// `[a(ω+ω_Δ), ℓ(ω+ω_Δ), m(ω), m†(−ω), ℓ†(−ω+ω_Δ), a†(−ω+ω_Δ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityMatrix {
    pub omega: f64,
    pub entries: SMatrix<Complex64, 6, 6>,
}

impl SusceptibilityMatrix {
    pub const A: usize = 0;
    pub const L: usize = 1;
    pub const M: usize = 2;
    pub const M_DAG: usize = 3;
    pub const L_DAG: usize = 4;
    pub const A_DAG: usize = 5;

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Upper-left block coupling the direct fields.
    pub fn s_block(&self) -> SMatrix<Complex64, 3, 3> {
        self.entries.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Upper-right block coupling direct outputs to conjugate inputs.
    pub fn p_block(&self) -> SMatrix<Complex64, 3, 3> {
        self.entries.fixed_view::<3, 3>(0, 3).into_owned()
    }

    pub fn as_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_iterator(6, 6, self.entries.iter().copied())
    }

    /// Largest elementwise deviation of `ζ J ζ†` from `J`.
    pub fn commutator_defect(&self) -> f64 {
        network::commutator_defect(&self.as_dmatrix())
    }

    /// Largest elementwise difference from another matrix.
    pub fn max_abs_diff(&self, other: &SusceptibilityMatrix) -> f64 {
        (self.entries - other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputPsd {
    pub s_axion: f64,
    pub s_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VisibilityMode {
    Ceasefire,
    Standard { kappa_c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCurve {
    pub omegas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub params_echo: TwoModeParams,
    pub mode: VisibilityMode,
}

pub fn beta(omega: f64, p: &TwoModeParams) -> Complex64 {
    (I * omega + p.kappa_m / 2.0) * (I * omega + p.kappa_l / 2.0) + (p.g * p.g - p.h * p.h)
}

fn checked_beta(omega: f64, p: &TwoModeParams) -> Result<Complex64> {
    let b = beta(omega, p);
    if b.norm() < DIVERGENCE_THRESHOLD {
        return Err(Error::ParametricDivergence {
            omega,
            quantity: "beta",
            magnitude: b.norm(),
        });
    }
    Ok(b)
}

pub fn susceptibilities(omega: f64, p: &TwoModeParams) -> Result<Susceptibilities> {
    let b = checked_beta(omega, p)?;
    let chi_ma = (p.g + p.h) * (p.kappa_m * p.kappa_a).sqrt() / b;
    let chi_ml = if p.kappa_a > 0.0 {
        (p.kappa_l / p.kappa_a).sqrt() * chi_ma
    } else {
        (p.g + p.h) * (p.kappa_m * p.kappa_l).sqrt() / b
    };
    let chi_mm = 1.0 - p.kappa_m * (I * omega + p.kappa_l / 2.0) / b;
    Ok(Susceptibilities { chi_ma, chi_ml, chi_mm })
}

/// Transmission susceptibility of a standard single-port haloscope with
/// readout coupling `kappa_c`.
pub fn chi_standard(omega: f64, kappa_c: f64, p: &TwoModeParams) -> Complex64 {
    Complex64::from((kappa_c * p.kappa_a).sqrt()) / (I * omega + (kappa_c + p.kappa_l) / 2.0)
}

/// Rows `a`, `ℓ`, `m` of the closed-form matrix.
fn upper_rows(omega: f64, p: &TwoModeParams) -> Result<SMatrix<Complex64, 3, 6>> {
    let b = checked_beta(omega, p)?;
    let sm = I * omega + p.kappa_m / 2.0;
    let sl = I * omega + p.kappa_l / 2.0;
    let (ka, kl, km) = (p.kappa_a, p.kappa_loss(), p.kappa_m);
    let am = (ka * km).sqrt();
    let lm = (kl * km).sqrt();
    let al = (ka * kl).sqrt();
    let ig = I * p.g / b;
    let ih = I * p.h * Complex64::from_polar(1.0, p.phi) / b;
    let z = Complex64::from(0.0);

    #[rustfmt::skip]
    let rows = SMatrix::<Complex64, 3, 6>::from_row_slice(&[
        1.0 - ka * sm / b, -al * sm / b,      ig * am,           ih * am, z,       z,
        -al * sm / b,      1.0 - kl * sm / b, ig * lm,           ih * lm, z,       z,
        ig * am,           ig * lm,           1.0 - km * sl / b, z,       ih * lm, ih * am,
    ]);
    Ok(rows)
}

/// Closed-form susceptibility matrix. The conjugate rows follow from the
/// mirror symmetry `ζ_{5−i,5−j}(ω) = ζ_{i,j}(−ω)*`.
pub fn zeta_matrix(omega: f64, p: &TwoModeParams) -> Result<SusceptibilityMatrix> {
    let up = upper_rows(omega, p)?;
    let down = upper_rows(-omega, p)?;
    let entries =
        SMatrix::<Complex64, 6, 6>::from_fn(|r, c| if r < 3 { up[(r, c)] } else { down[(5 - r, 5 - c)].conj() });
    Ok(SusceptibilityMatrix { omega, entries })
}

/// The two-mode system as a generic linear network: modes `[A, B]`, ports
/// `[a, ℓ, m]`.
pub fn two_mode_network(p: &TwoModeParams) -> LinearNetwork {
    LinearNetwork::new(
        vec![0.0, 0.0],
        vec![
            Port {
                mode: 0,
                kappa: p.kappa_a,
            },
            Port {
                mode: 0,
                kappa: p.kappa_loss(),
            },
            Port {
                mode: 1,
                kappa: p.kappa_m,
            },
        ],
    )
    .swap(0, 1, Complex64::from(p.g))
    .squeeze(0, 1, Complex64::from_polar(p.h, p.phi))
}

/// Susceptibility matrix from a direct linear solve of the equations of motion.
pub fn zeta_oracle(omega: f64, p: &TwoModeParams) -> Result<SusceptibilityMatrix> {
    let z = two_mode_network(p).scattering(omega)?;
    let entries = SMatrix::<Complex64, 6, 6>::from_fn(|r, c| z[(r, c)]);
    Ok(SusceptibilityMatrix { omega, entries })
}

/// Quadrature spectral densities of the measurement output, split into the
/// axion excess and everything else.
pub fn output_psd(omega: f64, theta: QuadratureAngle, p: &TwoModeParams) -> Result<OutputPsd> {
    let b = checked_beta(omega, p)?.norm_sqr();
    let c = (2.0 * theta.radians() - p.phi).cos();
    let (g, h) = (p.g, p.h);
    let s_axion = p.n_a * p.kappa_a * p.kappa_m * (g * g + h * h + 2.0 * g * h * c) / b;
    let s_noise = (p.n_t + 0.5) * (1.0 + 2.0 * p.kappa_l * p.kappa_m * (h * h + g * h * c) / b);
    Ok(OutputPsd {
        s_axion: s_axion.max(0.0),
        s_noise,
    })
}

/// Output quadrature spectral density evaluated from any scattering matrix
/// row, with per-port occupations in direct-half order.
pub fn quadrature_psd(zeta: &DMatrix<Complex64>, row: usize, theta: QuadratureAngle, occupation: &[f64]) -> f64 {
    network::quadrature_psd(zeta, row, theta.radians(), occupation)
}

/// Noise added by the follow-on phase-insensitive amplifier, referred to the
/// output: its idler port sits at the same temperature as the other ports.
pub fn follow_on_noise(n_t: f64) -> f64 {
    n_t + 0.5
}

pub fn alpha_ceasefire(omega: f64, p: &TwoModeParams) -> Result<f64> {
    let s = output_psd(omega, QuadratureAngle::amplified(p), p)?;
    Ok(s.s_axion / (s.s_noise + follow_on_noise(p.n_t)))
}

pub fn alpha_standard(omega: f64, kappa_c: f64, p: &TwoModeParams) -> f64 {
    p.n_a * chi_standard(omega, kappa_c, p).norm_sqr() / (p.n_t + 0.5)
}

pub fn visibility(omega_grid: &[f64], p: &TwoModeParams, mode: VisibilityMode) -> Result<VisibilityCurve> {
    let p = p.validated()?;
    if omega_grid.is_empty() {
        return Err(Error::invalid("omega_grid", "must not be empty"));
    }
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("omega_grid", "must be strictly increasing"));
    }
    if let VisibilityMode::Standard { kappa_c } = mode {
        if !(kappa_c > 0.0) {
            return Err(Error::invalid("kappa_c", "must be > 0"));
        }
    }
    let alphas = omega_grid
        .iter()
        .map(|&w| match mode {
            VisibilityMode::Ceasefire => alpha_ceasefire(w, &p),
            VisibilityMode::Standard { kappa_c } => Ok(alpha_standard(w, kappa_c, &p)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VisibilityCurve {
        omegas: omega_grid.to_vec(),
        alphas,
        params_echo: p,
        mode,
    })
}

/// `Y_θ` weight of input `k` for a row pair `(row, row†)`.
pub(crate) fn y_weight(direct: Complex64, conjugate: Complex64, theta: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, theta);
    (e.conj() * direct - e * conjugate) * (-I * FRAC_1_SQRT_2)
}
