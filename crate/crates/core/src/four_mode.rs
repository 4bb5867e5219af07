//! Extended model with the two transmission-line modes `C` and `D` that
//! bracket the cavity in frequency, both parametrically coupled to the readout.
//!
//! Detunings are `Δ_jA = ω_j − ω_A`. Only these enter the measurement-port
//! response, so the model is the same whether the readout sits above or below
//! the cavity band.
//!
//! Vector ordering for the ten port fields is
//! `[a, ℓ, C, D, m, m†, D†, C†, ℓ†, a†]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::circuit::{self, Bridge, CircuitSpec, DriveSpec, ModeCatalog, ModeLabel};
use crate::error::{Error, Result};
use crate::langevin_core::{
    self as lc, OutputPsd, QuadratureAngle, TwoModeParams, DIVERGENCE_THRESHOLD, WEAK_PORT_LIMIT,
};
use crate::network::{LinearNetwork, Port};
use crate::quadrature::WindowSpec;
use crate::scanrate::{self, EnhancementResult};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn default_one() -> f64 {
    1.0
}
fn default_kappa_a() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourModeParams {
    #[serde(default = "default_one")]
    pub kappa_l: f64,
    pub kappa_m: f64,
    #[serde(default = "default_kappa_a")]
    pub kappa_a: f64,
    #[serde(default = "default_one")]
    pub kappa_c_mode: f64,
    #[serde(default = "default_one")]
    pub kappa_d_mode: f64,
    pub g_ab: f64,
    pub h_ab: f64,
    pub g_cb: f64,
    pub h_cb: f64,
    pub g_db: f64,
    pub h_db: f64,
    pub delta_ca: f64,
    pub delta_da: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub n_t: f64,
    #[serde(default = "default_one")]
    pub n_a: f64,
    #[serde(default = "default_one")]
    pub p_a: f64,
}

impl FourModeParams {
    /// Two-mode parameters with uncoupled line modes at `delta_ca`, `delta_da`
    /// and line-mode damping equal to the cavity's.
    pub fn from_two_mode(p: &TwoModeParams, delta_ca: f64, delta_da: f64) -> Result<Self> {
        FourModeParams {
            kappa_l: p.kappa_l,
            kappa_m: p.kappa_m,
            kappa_a: p.kappa_a,
            kappa_c_mode: p.kappa_l,
            kappa_d_mode: p.kappa_l,
            g_ab: p.g,
            h_ab: p.h,
            g_cb: 0.0,
            h_cb: 0.0,
            g_db: 0.0,
            h_db: 0.0,
            delta_ca,
            delta_da,
            phi: p.phi,
            n_t: p.n_t,
            n_a: p.n_a,
            p_a: 1.0,
        }
        .validated()
    }

    /// The cavity–readout pair on its own.
    pub fn two_mode_part(&self) -> TwoModeParams {
        TwoModeParams {
            kappa_l: self.kappa_l,
            kappa_m: self.kappa_m,
            kappa_a: self.kappa_a,
            g: self.g_ab,
            h: self.h_ab,
            phi: self.phi,
            n_t: self.n_t,
            n_a: self.n_a,
        }
    }

    pub fn validated(mut self) -> Result<Self> {
        let rates = [
            ("kappa_l", self.kappa_l),
            ("kappa_m", self.kappa_m),
            ("kappa_a", self.kappa_a),
            ("kappa_c_mode", self.kappa_c_mode),
            ("kappa_d_mode", self.kappa_d_mode),
            ("g_ab", self.g_ab),
            ("h_ab", self.h_ab),
            ("g_cb", self.g_cb),
            ("h_cb", self.h_cb),
            ("g_db", self.g_db),
            ("h_db", self.h_db),
            ("n_t", self.n_t),
            ("n_a", self.n_a),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.kappa_l <= 0.0 {
            return Err(Error::invalid("kappa_l", "must be > 0"));
        }
        if self.kappa_a >= WEAK_PORT_LIMIT * self.kappa_l {
            return Err(Error::invalid("kappa_a", "must be well below kappa_l"));
        }
        for (name, d) in [("delta_ca", self.delta_ca), ("delta_da", self.delta_da)] {
            if d == 0.0 || !d.is_finite() {
                return Err(Error::invalid(name, "must be finite and nonzero"));
            }
        }
        if !(self.p_a > 0.0 && self.p_a <= 1.0) {
            return Err(Error::invalid("p_a", "must lie in (0, 1]"));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        self.phi = self.phi.rem_euclid(2.0 * PI);
        Ok(self)
    }

    fn line_modes(&self) -> [(f64, f64, f64, f64); 2] {
        [
            (self.g_cb, self.h_cb, self.kappa_c_mode, self.delta_ca),
            (self.g_db, self.h_db, self.kappa_d_mode, self.delta_da),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaGammaEta {
    pub beta: Complex64,
    /// `β*(−ω)`
    pub beta_conj_neg: Complex64,
    pub gamma: Complex64,
    /// `γ*(−ω)`
    pub gamma_conj_neg: Complex64,
    pub eta: Complex64,
}

fn beta4(omega: f64, p: &FourModeParams) -> Complex64 {
    let sl = I * omega + p.kappa_l / 2.0;
    let sm = I * omega + p.kappa_m / 2.0;
    let sum: Complex64 = p
        .line_modes()
        .iter()
        .map(|&(g, h, k, d)| g * g / (I * (omega + d) + k / 2.0) - h * h / (I * (omega - d) + k / 2.0))
        .sum();
    sm * sl + (p.g_ab * p.g_ab - p.h_ab * p.h_ab) + sl * sum
}

fn gamma4(omega: f64, p: &FourModeParams) -> Complex64 {
    let sl = I * omega + p.kappa_l / 2.0;
    let e = Complex64::from_polar(1.0, p.phi);
    p.line_modes()
        .iter()
        .map(|&(g, h, k, d)| 2.0 * I * g * h * e * sl * d / ((I * (omega - d) + k / 2.0) * (I * (omega + d) + k / 2.0)))
        .sum()
}

/// Per-mode contributions to `γ(ω)`, in the order `[C, D]`.
pub fn gamma_terms(omega: f64, p: &FourModeParams) -> [Complex64; 2] {
    let sl = I * omega + p.kappa_l / 2.0;
    let e = Complex64::from_polar(1.0, p.phi);
    p.line_modes()
        .map(|(g, h, k, d)| 2.0 * I * g * h * e * sl * d / ((I * (omega - d) + k / 2.0) * (I * (omega + d) + k / 2.0)))
}

pub fn beta_gamma_eta(omega: f64, p: &FourModeParams) -> Result<BetaGammaEta> {
    let beta = beta4(omega, p);
    let beta_conj_neg = beta4(-omega, p).conj();
    let gamma = gamma4(omega, p);
    let gamma_conj_neg = gamma4(-omega, p).conj();
    let eta = beta * beta_conj_neg - gamma * gamma_conj_neg;
    if eta.norm() < DIVERGENCE_THRESHOLD {
        return Err(Error::ParametricDivergence {
            omega,
            quantity: "eta",
            magnitude: eta.norm(),
        });
    }
    Ok(BetaGammaEta {
        beta,
        beta_conj_neg,
        gamma,
        gamma_conj_neg,
        eta,
    })
}

/// Measurement-port row of the ten-port scattering map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zeta4Row {
    pub omega: f64,
    pub zeta_ma: Complex64,
    pub zeta_ma_dag: Complex64,
    pub zeta_ml: Complex64,
    pub zeta_ml_dag: Complex64,
    pub zeta_mc: Complex64,
    pub zeta_mc_dag: Complex64,
    pub zeta_md: Complex64,
    pub zeta_md_dag: Complex64,
    pub zeta_mm: Complex64,
    pub zeta_mm_dag: Complex64,
}

impl Zeta4Row {
    pub const M: usize = 4;

    /// Entries in the fixed ten-port ordering.
    pub fn to_array(&self) -> [Complex64; 10] {
        [
            self.zeta_ma,
            self.zeta_ml,
            self.zeta_mc,
            self.zeta_md,
            self.zeta_mm,
            self.zeta_mm_dag,
            self.zeta_md_dag,
            self.zeta_mc_dag,
            self.zeta_ml_dag,
            self.zeta_ma_dag,
        ]
    }

    pub fn from_array(omega: f64, z: [Complex64; 10]) -> Self {
        Zeta4Row {
            omega,
            zeta_ma: z[0],
            zeta_ml: z[1],
            zeta_mc: z[2],
            zeta_md: z[3],
            zeta_mm: z[4],
            zeta_mm_dag: z[5],
            zeta_md_dag: z[6],
            zeta_mc_dag: z[7],
            zeta_ml_dag: z[8],
            zeta_ma_dag: z[9],
        }
    }

    pub fn max_abs_diff(&self, other: &Zeta4Row) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Closed-form measurement row.
pub fn zeta4(omega: f64, p: &FourModeParams) -> Result<Zeta4Row> {
    let bge = beta_gamma_eta(omega, p)?;
    let (bm, gm, eta) = (bge.beta_conj_neg, bge.gamma, bge.eta);
    let e = Complex64::from_polar(1.0, p.phi);
    let sl = I * omega + p.kappa_l / 2.0;
    let km = p.kappa_m;
    let direct = |g: f64, h: f64| I / eta * (g * bm - h * e.conj() * gm);
    let conjugate = |g: f64, h: f64| I / eta * (h * e * bm - g * gm);
    let cavity = |k: f64| (km * k).sqrt();
    let line = |g: f64, h: f64, k: f64, d: f64| {
        let s = (k * km).sqrt() * sl;
        (
            direct(g, h) * s / (I * (omega + d) + k / 2.0),
            conjugate(g, h) * s / (I * (omega - d) + k / 2.0),
        )
    };
    let (mc, mc_dag) = line(p.g_cb, p.h_cb, p.kappa_c_mode, p.delta_ca);
    let (md, md_dag) = line(p.g_db, p.h_db, p.kappa_d_mode, p.delta_da);
    let kl = p.kappa_l - p.kappa_a;
    Ok(Zeta4Row {
        omega,
        zeta_ma: direct(p.g_ab, p.h_ab) * cavity(p.kappa_a),
        zeta_ma_dag: conjugate(p.g_ab, p.h_ab) * cavity(p.kappa_a),
        zeta_ml: direct(p.g_ab, p.h_ab) * cavity(kl),
        zeta_ml_dag: conjugate(p.g_ab, p.h_ab) * cavity(kl),
        zeta_mc: mc,
        zeta_mc_dag: mc_dag,
        zeta_md: md,
        zeta_md_dag: md_dag,
        zeta_mm: 1.0 - bm * km * sl / eta,
        zeta_mm_dag: -gm * km * sl / eta,
    })
}

/// The extended system as a generic network: modes `[A, C, D, B]`, ports
/// `[a, ℓ, C, D, m]`.
pub fn four_mode_network(p: &FourModeParams) -> LinearNetwork {
    let e = Complex64::from_polar(1.0, p.phi);
    LinearNetwork::new(
        vec![0.0, p.delta_ca, p.delta_da, 0.0],
        vec![
            Port {
                mode: 0,
                kappa: p.kappa_a,
            },
            Port {
                mode: 0,
                kappa: p.kappa_l - p.kappa_a,
            },
            Port {
                mode: 1,
                kappa: p.kappa_c_mode,
            },
            Port {
                mode: 2,
                kappa: p.kappa_d_mode,
            },
            Port {
                mode: 3,
                kappa: p.kappa_m,
            },
        ],
    )
    .swap(0, 3, Complex64::from(p.g_ab))
    .squeeze(0, 3, p.h_ab * e)
    .swap(1, 3, Complex64::from(p.g_cb))
    .squeeze(1, 3, p.h_cb * e)
    .swap(2, 3, Complex64::from(p.g_db))
    .squeeze(2, 3, p.h_db * e)
}

/// Full `10 × 10` scattering map from a dense solve of the equations of motion.
pub fn scattering4(omega: f64, p: &FourModeParams) -> Result<DMatrix<Complex64>> {
    four_mode_network(p).scattering(omega)
}

/// Measurement row from a dense solve, independent of the closed forms.
pub fn eom_oracle4(omega: f64, p: &FourModeParams) -> Result<Zeta4Row> {
    let z = scattering4(omega, p)?;
    let row: [Complex64; 10] = std::array::from_fn(|k| z[(Zeta4Row::M, k)]);
    Ok(Zeta4Row::from_array(omega, row))
}

/// Rows `m` and `m†` at `omega`; the latter is the mirror of the `m` row at `−omega`.
fn measurement_rows(omega: f64, p: &FourModeParams) -> Result<([Complex64; 10], [Complex64; 10])> {
    let direct = zeta4(omega, p)?.to_array();
    let mirror = zeta4(-omega, p)?.to_array();
    let conj: [Complex64; 10] = std::array::from_fn(|k| mirror[9 - k].conj());
    Ok((direct, conj))
}

/// Quadrature spectral densities of the measurement output. The `a` port
/// carries `n_t + n_a`; `ℓ`, `C`, `D` and `m` carry `n_t`.
pub fn output_psd4(omega: f64, theta: QuadratureAngle, p: &FourModeParams) -> Result<OutputPsd> {
    let (d, c) = measurement_rows(omega, p)?;
    let w: Vec<f64> = (0..10)
        .map(|k| lc::y_weight(d[k], c[k], theta.radians()).norm_sqr())
        .collect();
    let s_axion = p.n_a * (w[0] + w[9]);
    let s_noise = (p.n_t + 0.5) * w.iter().sum::<f64>();
    Ok(OutputPsd { s_axion, s_noise })
}

/// Quadrature that maximizes the on-resonance signal.
pub fn amplified_angle4(p: &FourModeParams) -> Result<QuadratureAngle> {
    let (d, c) = measurement_rows(0.0, p)?;
    let s = d[0] * c[0].conj() + d[9] * c[9].conj();
    if s.norm() == 0.0 {
        return Ok(QuadratureAngle::new(p.phi / 2.0));
    }
    Ok(QuadratureAngle::new((s.arg() - PI) / 2.0))
}

pub fn alpha4(omega: f64, theta: QuadratureAngle, p: &FourModeParams) -> Result<f64> {
    let s = output_psd4(omega, theta, p)?;
    Ok(s.s_axion / (s.s_noise + lc::follow_on_noise(p.n_t)))
}

pub fn enhancement4(p: &FourModeParams) -> Result<EnhancementResult> {
    enhancement4_with_tol(p, scanrate::DEFAULT_TOL)
}

/// `E⁽⁴⁾ = p_A² ∫α⁽⁴⁾² / ∫α_0²|_{κ_c = 2κ_ℓ}`.
pub fn enhancement4_with_tol(p: &FourModeParams, tol: f64) -> Result<EnhancementResult> {
    let p = p.validated()?;
    let theta = amplified_angle4(&p)?;
    let gain_bw = 4.0 * p.g_ab.max(p.h_ab).powi(2) / p.kappa_m.max(f64::MIN_POSITIVE);
    let window = WindowSpec {
        start: 50.0 * p.kappa_l.max(p.kappa_m).max(gain_bw),
        breakpoints: vec![0.0, p.delta_ca, -p.delta_ca, p.delta_da, -p.delta_da],
    };
    let cf = scanrate::integrate_alpha_sq(|w| alpha4(w, theta, &p), tol, &window)?;
    let std = scanrate::standard_integral(&p.two_mode_part(), tol)?;
    scanrate::ratio(cf, std, p.p_a * p.p_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningRow {
    /// Cavity offset from the midpoint of the two line modes.
    pub delta_a: f64,
    pub delta_ca: f64,
    pub delta_da: f64,
    /// Inside an excluded neighborhood of a line mode.
    pub flagged: bool,
    pub enhancement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningSweep {
    pub rows: Vec<DetuningRow>,
    pub peak_delta_a: Option<f64>,
    pub peak_value: Option<f64>,
}

impl DetuningSweep {
    /// Mean of `E` over `[−half_width, half_width]`, or `None` if any point
    /// there is flagged or the grid does not cover the window.
    pub fn window_average(&self, half_width: f64) -> Option<f64> {
        let pts: Option<Vec<(f64, f64)>> = self
            .rows
            .iter()
            .map(|r| r.enhancement.map(|e| (r.delta_a, e)))
            .collect();
        match pts {
            Some(pts) => window_average(&pts, 0.0, half_width),
            None => {
                let inside: Option<Vec<(f64, f64)>> = self
                    .rows
                    .iter()
                    .filter(|r| r.delta_a.abs() <= half_width)
                    .map(|r| r.enhancement.map(|e| (r.delta_a, e)))
                    .collect();
                window_average(&inside?, 0.0, half_width)
            }
        }
    }
}

/// Trapezoidal mean of a sampled curve over `[center − half, center + half]`,
/// interpolating linearly at the window edges.
pub fn window_average(points: &[(f64, f64)], center: f64, half: f64) -> Option<f64> {
    let (lo, hi) = (center - half, center + half);
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 2 || pts[0].0 > lo || pts[pts.len() - 1].0 < hi {
        return None;
    }
    let interp = |x: f64| {
        let i = pts.windows(2).position(|w| w[0].0 <= x && x <= w[1].0)?;
        let (a, b) = (pts[i], pts[i + 1]);
        Some(if b.0 == a.0 {
            a.1
        } else {
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        })
    };
    let mut xs: Vec<(f64, f64)> = vec![(lo, interp(lo)?)];
    xs.extend(pts.iter().copied().filter(|p| p.0 > lo && p.0 < hi));
    xs.push((hi, interp(hi)?));
    let area: f64 = xs.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    Some(area / (hi - lo))
}

/// `E⁽⁴⁾` as the cavity moves between two line modes spaced by `fsr`.
/// Points closer than `gap` to either line mode are flagged and skipped.
pub fn detuning_sweep(p_template: &FourModeParams, delta_a_grid: &[f64], fsr: f64, gap: f64) -> Result<DetuningSweep> {
    if !(fsr > 0.0) {
        return Err(Error::invalid("fsr", "must be > 0"));
    }
    if let Some(bad) = delta_a_grid.iter().find(|d| d.abs() >= fsr / 2.0) {
        return Err(Error::invalid("delta_a_grid", format!("{bad} lies outside one FSR")));
    }
    let rows: Vec<DetuningRow> = delta_a_grid
        .par_iter()
        .map(|&delta_a| {
            let delta_ca = -fsr / 2.0 - delta_a;
            let delta_da = fsr / 2.0 - delta_a;
            let flagged = delta_ca.abs().min(delta_da.abs()) < gap;
            let enhancement = if flagged {
                None
            } else {
                let p = FourModeParams {
                    delta_ca,
                    delta_da,
                    ..*p_template
                };
                Some(enhancement4(&p)?.value)
            };
            Ok(DetuningRow {
                delta_a,
                delta_ca,
                delta_da,
                flagged,
                enhancement,
            })
        })
        .collect::<Result<_>>()?;
    let peak = rows
        .iter()
        .filter_map(|r| r.enhancement.map(|e| (r.delta_a, e)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    Ok(DetuningSweep {
        peak_delta_a: peak.map(|p| p.0),
        peak_value: peak.map(|p| p.1),
        rows,
    })
}

/// Four-mode parameters derived from a circuit, in units of the cavity loss rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitDerived {
    pub params: FourModeParams,
    /// Catalog of the network with the bridge at its time-averaged inductance.
    pub catalog: ModeCatalog,
    /// Cavity loss rate used as the unit, rad/s.
    pub kappa_l: f64,
    pub warnings: Vec<String>,
}

/// Labels the modes of `spec` under `drive`, evaluates the interaction rates
/// and expresses everything in units of `κ_A`. Line-mode damping is set to the
/// cavity's since the ladder itself is lossless.
pub fn params_from_circuit(spec: &CircuitSpec, drive: &DriveSpec, band: [f64; 2]) -> Result<CircuitDerived> {
    let drive = drive.validated()?;
    let ren = circuit::build_catalog_with(spec, Bridge::averaged(&drive), band, spec.default_grid(band))?;
    let table = circuit::rates_from(ren, spec, &drive);
    let cat = table.catalog.clone();
    let k = cat.kappa_l;
    let rate = |l: ModeLabel| table.get(l).map(|r| (r.g / k, r.h / k)).unwrap_or((0.0, 0.0));
    let (g_ab, h_ab) = rate(ModeLabel::A);
    let (g_cb, h_cb) = rate(ModeLabel::C);
    let (g_db, h_db) = rate(ModeLabel::D);
    let params = FourModeParams {
        kappa_l: 1.0,
        kappa_m: cat.kappa_m / k,
        kappa_a: default_kappa_a(),
        kappa_c_mode: 1.0,
        kappa_d_mode: 1.0,
        g_ab,
        h_ab,
        g_cb,
        h_cb,
        g_db,
        h_db,
        delta_ca: cat.delta_ca / k,
        delta_da: cat.delta_da / k,
        phi: drive.phi,
        n_t: 0.0,
        n_a: 1.0,
        p_a: cat.p_a,
    }
    .validated()?;
    Ok(CircuitDerived {
        params,
        catalog: cat,
        kappa_l: k,
        warnings: table.warnings,
    })
}

/// Retunes the bare cavity until the dressed cavity mode sits midway between
/// its two neighboring line modes with the drive on.
pub fn center_cavity(spec: &CircuitSpec, drive: &DriveSpec) -> Result<CircuitSpec> {
    let mut s = *spec;
    for _ in 0..12 {
        let d = params_from_circuit(&s, drive, s.default_band())?;
        let off = midpoint_offset(&d.catalog);
        if off.abs() < 1e-9 * d.catalog.fsr {
            break;
        }
        let f = s.cavity_omega() / (2.0 * PI) - off / (2.0 * PI);
        s = s.with_cavity_frequency(f)?;
    }
    Ok(s)
}

/// `ω_A − (ω_C + ω_D)/2`, rad/s.
pub fn midpoint_offset(cat: &ModeCatalog) -> f64 {
    cat.a().omega - 0.5 * (cat.c().omega + cat.d().omega)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitSweepPoint {
    /// Bare cavity frequency, Hz.
    pub f_bare: f64,
    /// Dressed cavity frequency, Hz (NaN when flagged).
    pub f_a: f64,
    /// Offset from the line-mode midpoint, Hz.
    pub delta_a_hz: f64,
    pub p_a: f64,
    pub kappa_l_hz: f64,
    pub g_ab: f64,
    pub g_cb: f64,
    pub g_db: f64,
    pub enhancement: Option<f64>,
    pub flag: Option<String>,
}

/// `E⁽⁴⁾` with every parameter recomputed from the circuit at each bare
/// cavity frequency in `f_bare` (Hz). Catalog failures such as avoided
/// crossings flag the point instead of aborting the sweep.
pub fn circuit_detuning_sweep(spec: &CircuitSpec, drive: &DriveSpec, f_bare: &[f64]) -> Result<Vec<CircuitSweepPoint>> {
    let drive = drive.validated()?;
    f_bare
        .par_iter()
        .map(|&f| {
            let s = spec.with_cavity_frequency(f)?;
            let flagged = |msg: String| CircuitSweepPoint {
                f_bare: f,
                f_a: f64::NAN,
                delta_a_hz: f64::NAN,
                p_a: f64::NAN,
                kappa_l_hz: f64::NAN,
                g_ab: f64::NAN,
                g_cb: f64::NAN,
                g_db: f64::NAN,
                enhancement: None,
                flag: Some(msg),
            };
            let d = match params_from_circuit(&s, &drive, s.default_band()) {
                Ok(d) => d,
                Err(
                    e @ (Error::AvoidedCrossing { .. } | Error::NoCavityMode { .. } | Error::InvalidParameter { .. }),
                ) => return Ok(flagged(e.to_string())),
                Err(e) => return Err(e),
            };
            let e = match enhancement4(&d.params) {
                Ok(e) => Some(e.value),
                Err(Error::ParametricDivergence { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(CircuitSweepPoint {
                f_bare: f,
                f_a: d.catalog.a().omega / (2.0 * PI),
                delta_a_hz: midpoint_offset(&d.catalog) / (2.0 * PI),
                p_a: d.params.p_a,
                kappa_l_hz: d.kappa_l / (2.0 * PI),
                g_ab: d.params.g_ab,
                g_cb: d.params.g_cb,
                g_db: d.params.g_db,
                enhancement: e,
                flag: e.is_none().then(|| "parametric divergence".to_string()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthCurve {
    pub length: f64,
    pub fsr_hz: f64,
    pub points: Vec<CircuitSweepPoint>,
    /// `(f_a, E)` at the largest value on the curve.
    pub peak: Option<(f64, f64)>,
    /// Local maxima `(f_a, E)` along the curve.
    pub local_peaks: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSweep {
    pub curves: Vec<LengthCurve>,
    /// Local maxima of every curve, sorted by frequency and joined piecewise linearly.
    pub envelope: Vec<(f64, f64)>,
}

impl LengthSweep {
    /// Linear interpolation of the envelope at `f` (Hz).
    pub fn envelope_at(&self, f: f64) -> Option<f64> {
        let e = &self.envelope;
        let i = e.windows(2).position(|w| w[0].0 <= f && f <= w[1].0)?;
        let (a, b) = (e[i], e[i + 1]);
        Some(a.1 + (b.1 - a.1) * (f - a.0) / (b.0 - a.0))
    }
}

/// Repeats the circuit-driven cavity tuning for each line length.
pub fn length_sweep(spec: &CircuitSpec, drive: &DriveSpec, lengths: &[f64], f_bare: &[f64]) -> Result<LengthSweep> {
    if let Some(bad) = lengths.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::invalid("lengths", format!("{bad} is not positive")));
    }
    let curves = lengths
        .iter()
        .map(|&length| {
            let s = spec.with_line_length(length)?;
            let points = circuit_detuning_sweep(&s, drive, f_bare)?;
            let valid: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|p| p.enhancement.map(|e| (p.f_a, e)))
                .collect();
            let peak = valid.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
            let local_peaks = points
                .windows(3)
                .filter_map(|w| {
                    let (a, b, c) = (w[0].enhancement?, w[1].enhancement?, w[2].enhancement?);
                    (b >= a && b >= c).then_some((w[1].f_a, b))
                })
                .collect();
            Ok(LengthCurve {
                length,
                fsr_hz: s.fsr_hz(),
                points,
                peak,
                local_peaks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut envelope: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.local_peaks.iter().copied()).collect();
    envelope.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(LengthSweep { curves, envelope })
}
