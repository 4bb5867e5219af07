//! Lumped-element model of the cavity, the transmission-line ladder and the
//! bridge-coupled readout resonator.
//!
//! The network is a chain of nodes:
//!
//! ```text
//! cav ─C_c─ t0 ─L─ t1 ─L─ … ─L─ tN ═bridge═ ro
//!  │              │         │      │
//! L_A C_A R_A    C_cell   C_cell  C_B R_B
//! ```
//!
//! Port `a` is the cavity node, `tl` the far end of the ladder and `b` the
//! readout node. The Wheatstone bridge is reduced to its T-junction and
//! stamped as an inverse-inductance matrix between `tl` and `ro`.
//!
//! Admittances use the chain structure directly: reducing everything on one
//! side of a node takes O(N) work. Mode counting below a frequency uses the
//! inertia (Sturm count) of the lossless tridiagonal matrix `K − ω²C`, which
//! lets the zero scan resolve modes that sit almost on top of a pole.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// Catalogs whose cavity-like mode keeps less than this self-participation
/// are treated as sitting on an avoided crossing.
pub const AVOIDED_CROSSING_P_A: f64 = 0.5;

const BISECT_REL_TOL: f64 = 1e-12;
const MIN_CELL_REL: f64 = 1e-13;
const MERGE_REL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cavity {
    pub l_a: f64,
    pub c_a: f64,
    pub c_c: f64,
    pub r_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub n: usize,
    pub l_cell: f64,
    pub c_cell: f64,
}

impl Ladder {
    /// Cells of a dispersionless line of impedance `z0` and delay `length/v`.
    pub fn from_line(z0: f64, n: usize, line: &Line) -> Self {
        let tau = line.length / line.v / n as f64;
        Ladder {
            n,
            l_cell: z0 * tau,
            c_cell: tau / z0,
        }
    }

    pub fn z0(&self) -> f64 {
        (self.l_cell / self.c_cell).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Readout {
    pub l0: f64,
    pub c_b: f64,
    pub r_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub length: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub cavity: Cavity,
    pub ladder: Ladder,
    pub readout: Readout,
    pub line: Line,
}

impl CircuitSpec {
    pub fn validated(self) -> Result<Self> {
        let named = [
            ("cavity.l_a", self.cavity.l_a),
            ("cavity.c_a", self.cavity.c_a),
            ("cavity.c_c", self.cavity.c_c),
            ("cavity.r_a", self.cavity.r_a),
            ("ladder.l_cell", self.ladder.l_cell),
            ("ladder.c_cell", self.ladder.c_cell),
            ("readout.l0", self.readout.l0),
            ("readout.c_b", self.readout.c_b),
            ("readout.r_b", self.readout.r_b),
            ("line.length", self.line.length),
            ("line.v", self.line.v),
        ];
        for (name, v) in named {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
            if v.is_infinite() && !name.starts_with("cavity.r") && !name.starts_with("readout.r") {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.ladder.n < 2 {
            return Err(Error::invalid("ladder.n", "must be >= 2"));
        }
        let delay = self.ladder.n as f64 * (self.ladder.l_cell * self.ladder.c_cell).sqrt();
        let expect = self.line.length / self.line.v;
        if ((delay - expect) / expect).abs() > 1e-6 {
            return Err(Error::invalid(
                "ladder",
                format!("total cell delay {delay:e} s disagrees with length/v = {expect:e} s"),
            ));
        }
        Ok(self)
    }

    /// Same ladder impedance and cell count on a line of different length.
    pub fn with_line_length(&self, length: f64) -> Result<Self> {
        let line = Line { length, ..self.line };
        CircuitSpec {
            ladder: Ladder::from_line(self.ladder.z0(), self.ladder.n, &line),
            line,
            ..*self
        }
        .validated()
    }

    /// Same ladder impedance and line on a different cell count.
    pub fn with_cells(&self, n: usize) -> Result<Self> {
        CircuitSpec {
            ladder: Ladder::from_line(self.ladder.z0(), n, &self.line),
            ..*self
        }
        .validated()
    }

    /// Retunes the bare cavity to `f` (Hz) at fixed characteristic impedance.
    pub fn with_cavity_frequency(&self, f: f64) -> Result<Self> {
        let z = self.cavity_impedance();
        let w = 2.0 * PI * f;
        CircuitSpec {
            cavity: Cavity {
                l_a: z / w,
                c_a: 1.0 / (z * w),
                ..self.cavity
            },
            ..*self
        }
        .validated()
    }

    pub fn cavity_impedance(&self) -> f64 {
        (self.cavity.l_a / self.cavity.c_a).sqrt()
    }

    /// Bare cavity resonance, rad/s.
    pub fn cavity_omega(&self) -> f64 {
        1.0 / (self.cavity.l_a * self.cavity.c_a).sqrt()
    }

    /// Bare readout resonance, rad/s.
    pub fn readout_omega(&self) -> f64 {
        1.0 / (self.readout.l0 * self.readout.c_b).sqrt()
    }

    /// Readout loss rate `1/(R_B C_B)`, rad/s.
    pub fn kappa_b0(&self) -> f64 {
        1.0 / (self.readout.r_b * self.readout.c_b)
    }

    /// Ideal standing-wave spacing `v/(2L)`, Hz.
    pub fn fsr_hz(&self) -> f64 {
        self.line.v / (2.0 * self.line.length)
    }

    /// Band covering the cavity and readout with a margin of about two FSR.
    pub fn default_band(&self) -> [f64; 2] {
        let fsr = 2.0 * PI * self.fsr_hz();
        let (a, b) = (self.cavity_omega(), self.readout_omega());
        [a.min(b) - 2.0 * fsr, a.max(b) + 2.0 * fsr]
    }

    /// Grid size giving at least 20 points per FSR across `band`.
    pub fn default_grid(&self, band: [f64; 2]) -> usize {
        let fsr = 2.0 * PI * self.fsr_hz();
        (((band[1] - band[0]) / fsr * 20.0).ceil() as usize).max(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortId {
    A,
    B,
    Tl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub ell_delta: f64,
    pub ell_sigma: f64,
    #[serde(default)]
    pub phi: f64,
}

impl DriveSpec {
    /// Total modulation above which the first-order rates are flagged.
    pub const FIRST_ORDER_BOUND: f64 = 0.25;

    pub fn new(ell_delta: f64, ell_sigma: f64, phi: f64) -> Result<Self> {
        DriveSpec {
            ell_delta,
            ell_sigma,
            phi,
        }
        .validated()
    }

    pub fn validated(mut self) -> Result<Self> {
        if !(self.ell_delta >= 0.0) {
            return Err(Error::invalid("drive.ell_delta", "must be >= 0"));
        }
        if !(self.ell_sigma >= 0.0) {
            return Err(Error::invalid("drive.ell_sigma", "must be >= 0"));
        }
        if !(self.ell_delta + self.ell_sigma < 1.0) {
            return Err(Error::invalid("drive", "ell_delta + ell_sigma must be < 1"));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("drive.phi", "must be finite"));
        }
        self.phi = self.phi.rem_euclid(2.0 * PI);
        Ok(self)
    }

    /// Time average `⟨ε²⟩ = (ℓ_Δ² + ℓ_Σ²)/2`.
    pub fn mean_square(&self) -> f64 {
        0.5 * (self.ell_delta.powi(2) + self.ell_sigma.powi(2))
    }

    pub fn warnings(&self) -> Vec<String> {
        let total = self.ell_delta + self.ell_sigma;
        if total > Self::FIRST_ORDER_BOUND {
            vec![format!(
                "total fractional modulation {total:.3} exceeds {} (first-order rates are approximate)",
                Self::FIRST_ORDER_BOUND
            )]
        } else {
            Vec::new()
        }
    }
}

/// Inverse-inductance matrix `Γ = [[Γ11, Γ13], [Γ13, Γ11]]` of the reduced bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bridge {
    /// Static offset `ε`: arms `L₀(1−ε)`, stem `εL₀`.
    Static { eps: f64 },
    /// Time-averaged modulation: `L₀² → L₀²(1 − ⟨ε²⟩)` with no cross term.
    Averaged { mean_square: f64 },
}

impl Bridge {
    pub const BALANCED: Bridge = Bridge::Static { eps: 0.0 };

    pub fn averaged(drive: &DriveSpec) -> Self {
        Bridge::Averaged {
            mean_square: drive.mean_square(),
        }
    }

    fn gamma(&self, l0: f64) -> (f64, f64) {
        match *self {
            Bridge::Static { eps } => {
                let pre = 1.0 / (l0 * l0 * (1.0 - eps * eps));
                (pre * l0, -pre * eps * l0)
            }
            Bridge::Averaged { mean_square } => (1.0 / (l0 * (1.0 - mean_square)), 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Branch {
    pub c: f64,
    pub inv_l: f64,
    pub g: f64,
}

impl Branch {
    fn y(&self, w: f64) -> Complex64 {
        Complex64::new(self.g, w * self.c - self.inv_l / w)
    }

    fn stiffness(&self, w: f64) -> f64 {
        self.inv_l - w * w * self.c
    }
}

/// Nodes joined in a line by series branches; every node may carry a shunt.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Chain {
    pub shunt: Vec<Branch>,
    pub series: Vec<Branch>,
}

impl Chain {
    pub fn from_spec(spec: &CircuitSpec, bridge: Bridge) -> Self {
        let n = spec.ladder.n;
        let mut shunt = vec![Branch::default(); n + 3];
        let mut series = vec![Branch::default(); n + 2];
        let cav = &spec.cavity;
        shunt[0] = Branch {
            c: cav.c_a,
            inv_l: 1.0 / cav.l_a,
            g: 1.0 / cav.r_a,
        };
        series[0].c = cav.c_c;
        for i in 1..=n {
            series[i].inv_l = 1.0 / spec.ladder.l_cell;
            shunt[i + 1].c = spec.ladder.c_cell;
        }
        let (g11, g13) = bridge.gamma(spec.readout.l0);
        shunt[n + 1].inv_l += g11 + g13;
        series[n + 1].inv_l = -g13;
        shunt[n + 2] = Branch {
            c: spec.readout.c_b,
            inv_l: g11 + g13,
            g: 1.0 / spec.readout.r_b,
        };
        Chain { shunt, series }
    }

    pub fn node(spec: &CircuitSpec, port: PortId) -> usize {
        match port {
            PortId::A => 0,
            PortId::Tl => spec.ladder.n + 1,
            PortId::B => spec.ladder.n + 2,
        }
    }

    fn reduce(s: Complex64, load: Complex64) -> Complex64 {
        if s == Complex64::from(0.0) {
            s
        } else {
            s * load / (s + load)
        }
    }

    /// Admittances seen from node `j` through its left and right links,
    /// including everything beyond them.
    fn sides(&self, j: usize, w: f64) -> (Complex64, Complex64) {
        let mut left = Complex64::from(0.0);
        for k in 0..j {
            left = Self::reduce(self.series[k].y(w), self.shunt[k].y(w) + left);
        }
        let mut right = Complex64::from(0.0);
        for k in (j + 1..self.shunt.len()).rev() {
            right = Self::reduce(self.series[k - 1].y(w), self.shunt[k].y(w) + right);
        }
        (left, right)
    }

    pub fn admittance(&self, j: usize, w: f64) -> Complex64 {
        let (l, r) = self.sides(j, w);
        self.shunt[j].y(w) + l + r
    }

    /// Node voltages relative to node `j` when `j` is driven, `V_k / V_j`.
    pub fn voltage_ratios(&self, j: usize, w: f64) -> Vec<Complex64> {
        let n = self.shunt.len();
        // admittance looking away from j at each node, shunt included
        let mut beyond = vec![Complex64::from(0.0); n];
        let mut acc = Complex64::from(0.0);
        for ((b, shunt), series) in beyond.iter_mut().zip(&self.shunt).zip(&self.series).take(j) {
            *b = shunt.y(w) + acc;
            acc = Self::reduce(series.y(w), *b);
        }
        acc = Complex64::from(0.0);
        for k in (j + 1..n).rev() {
            beyond[k] = self.shunt[k].y(w) + acc;
            acc = Self::reduce(self.series[k - 1].y(w), beyond[k]);
        }
        let mut v = vec![Complex64::from(0.0); n];
        v[j] = Complex64::from(1.0);
        for k in (0..j).rev() {
            let s = self.series[k].y(w);
            v[k] = if s == Complex64::from(0.0) {
                s
            } else {
                v[k + 1] * s / (s + beyond[k])
            };
        }
        for k in j + 1..n {
            let s = self.series[k - 1].y(w);
            v[k] = if s == Complex64::from(0.0) {
                s
            } else {
                v[k - 1] * s / (s + beyond[k])
            };
        }
        v
    }

    /// Number of lossless normal modes with angular frequency below `w`.
    pub fn modes_below(&self, w: f64) -> usize {
        let n = self.shunt.len();
        let diag = |k: usize| {
            let mut d = self.shunt[k].stiffness(w);
            if k > 0 {
                d += self.series[k - 1].stiffness(w);
            }
            if k + 1 < n {
                d += self.series[k].stiffness(w);
            }
            d
        };
        let mut count = 0;
        let mut q = diag(0);
        for k in 0..n {
            if k > 0 {
                let e = -self.series[k - 1].stiffness(w);
                q = diag(k) - e * e / q;
            }
            if q == 0.0 {
                q = -f64::EPSILON * diag(k).abs().max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Dense `(K, C)` pair of the lossless network.
    #[cfg(test)]
    pub fn dense(&self) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
        let n = self.shunt.len();
        let mut k = nalgebra::DMatrix::zeros(n, n);
        let mut c = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] += self.shunt[i].inv_l;
            c[(i, i)] += self.shunt[i].c;
        }
        for i in 0..n - 1 {
            let s = self.series[i];
            for (a, b, sign) in [(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)] {
                k[(a, b)] += sign * s.inv_l;
                c[(a, b)] += sign * s.c;
            }
        }
        (k, c)
    }
}

fn finite_or_singular(y: Complex64, w: f64) -> Result<Complex64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::SingularNetwork {
            lo: w * (1.0 - 1e-12),
            hi: w * (1.0 + 1e-12),
        })
    }
}

/// Admittance at `port` with the bridge balanced and all other ports open.
pub fn port_admittance(spec: &CircuitSpec, port: PortId, omega: f64) -> Result<Complex64> {
    port_admittance_with(spec, Bridge::BALANCED, port, omega)
}

pub fn port_admittance_with(spec: &CircuitSpec, bridge: Bridge, port: PortId, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    let chain = Chain::from_spec(spec, bridge);
    finite_or_singular(chain.admittance(Chain::node(spec, port), omega), omega)
}

/// Central difference with one Richardson step, relative step `1e-6`.
fn admittance_slope(chain: &Chain, node: usize, w: f64) -> Complex64 {
    let h = 1e-6 * w;
    let d = |h: f64| (chain.admittance(node, w + h) - chain.admittance(node, w - h)) / (2.0 * h);
    (4.0 * d(h) - d(2.0 * h)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    A,
    B,
    C,
    D,
    Tl(usize),
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    pub omega: f64,
    pub z_eff_a: f64,
    pub z_eff_b: f64,
    pub z_eff_tl: f64,
    pub q: f64,
    pub kappa: f64,
    pub label: ModeLabel,
}

impl NormalMode {
    pub fn z_eff(&self, port: PortId) -> f64 {
        match port {
            PortId::A => self.z_eff_a,
            PortId::B => self.z_eff_b,
            PortId::Tl => self.z_eff_tl,
        }
    }
}

const PORTS: [PortId; 3] = [PortId::A, PortId::B, PortId::Tl];

/// Characterizes the mode at `w`: effective impedances at every port from the
/// admittance slope at the port where the mode is most visible, scaled to the
/// other ports by the mode's node-voltage ratios.
fn characterize(spec: &CircuitSpec, chain: &Chain, found_at: PortId, w: f64) -> NormalMode {
    let j = Chain::node(spec, found_at);
    let v = chain.voltage_ratios(j, w);
    let best = PORTS
        .into_iter()
        .max_by(|a, b| {
            v[Chain::node(spec, *a)]
                .norm_sqr()
                .total_cmp(&v[Chain::node(spec, *b)].norm_sqr())
        })
        .unwrap_or(found_at);
    let jb = Chain::node(spec, best);
    let vb = v[jb].norm_sqr();
    let slope = admittance_slope(chain, jb, w);
    let z_best = 2.0 / (w * slope.im);
    let y = chain.admittance(jb, w);
    let z = |p: PortId| z_best * v[Chain::node(spec, p)].norm_sqr() / vb;
    let kappa = 2.0 * y.re / slope.im;
    NormalMode {
        omega: w,
        z_eff_a: z(PortId::A),
        z_eff_b: z(PortId::B),
        z_eff_tl: z(PortId::Tl),
        q: w / kappa,
        kappa,
        label: ModeLabel::Unlabeled,
    }
}

struct Scanner<'a> {
    chain: &'a Chain,
    node: usize,
}

#[derive(Clone, Copy)]
struct Sample {
    w: f64,
    count: usize,
    im: f64,
}

impl Scanner<'_> {
    fn sample(&self, w: f64) -> Sample {
        let mut w = w;
        let mut im = self.chain.admittance(self.node, w).im;
        while !im.is_finite() {
            w *= 1.0 + 1e-11;
            im = self.chain.admittance(self.node, w).im;
        }
        Sample {
            w,
            count: self.chain.modes_below(w),
            im,
        }
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        while hi - lo > BISECT_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.chain.admittance(self.node, mid).im < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn resolve(&self, lo: Sample, hi: Sample, out: &mut Vec<f64>) -> Result<()> {
        let k = hi.count.saturating_sub(lo.count);
        if k == 0 {
            return Ok(());
        }
        if k == 1 && lo.im < 0.0 && hi.im > 0.0 {
            out.push(self.bisect(lo.w, hi.w));
            return Ok(());
        }
        if hi.w - lo.w < MIN_CELL_REL * hi.w {
            // a single mode with no admittance zero here has no voltage at this port
            return if k == 1 {
                Ok(())
            } else {
                Err(Error::UnresolvedPair { lo: lo.w, hi: hi.w })
            };
        }
        let mid = self.sample(0.5 * (lo.w + hi.w));
        self.resolve(lo, mid, out)?;
        self.resolve(mid, hi, out)
    }
}

fn check_band(band: [f64; 2]) -> Result<()> {
    if band[0] > 0.0 && band[1] > band[0] && band[1].is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("band", "must satisfy 0 < lo < hi"))
    }
}

/// Resonances seen at `port`: zeros of `Im Y` crossing upward.
pub fn find_normal_modes(spec: &CircuitSpec, port: PortId, band: [f64; 2], grid_pts: usize) -> Result<Vec<NormalMode>> {
    find_normal_modes_with(spec, Bridge::BALANCED, port, band, grid_pts)
}

pub fn find_normal_modes_with(
    spec: &CircuitSpec,
    bridge: Bridge,
    port: PortId,
    band: [f64; 2],
    grid_pts: usize,
) -> Result<Vec<NormalMode>> {
    check_band(band)?;
    if grid_pts < 2 {
        return Err(Error::invalid("grid_pts", "must be >= 2"));
    }
    let chain = Chain::from_spec(spec, bridge);
    let scanner = Scanner {
        chain: &chain,
        node: Chain::node(spec, port),
    };
    let samples: Vec<Sample> = (0..grid_pts)
        .map(|i| scanner.sample(band[0] + (band[1] - band[0]) * i as f64 / (grid_pts - 1) as f64))
        .collect();
    let mut zeros = Vec::new();
    for pair in samples.windows(2) {
        scanner.resolve(pair[0], pair[1], &mut zeros)?;
    }
    Ok(zeros.into_iter().map(|w| characterize(spec, &chain, port, w)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCatalog {
    pub modes: Vec<NormalMode>,
    pub a_index: usize,
    pub b_index: usize,
    pub c_index: usize,
    pub d_index: usize,
    pub p_a: f64,
    /// Median spacing of the line modes, rad/s.
    pub fsr: f64,
    /// `ω_C − ω_A`, rad/s.
    pub delta_ca: f64,
    /// `ω_D − ω_A`, rad/s.
    pub delta_da: f64,
    /// Cavity loss rate `κ_A`, rad/s.
    pub kappa_l: f64,
    /// Readout loss rate `1/(R_B C_B)`, rad/s.
    pub kappa_m: f64,
    pub band: [f64; 2],
}

impl ModeCatalog {
    pub fn a(&self) -> &NormalMode {
        &self.modes[self.a_index]
    }
    pub fn b(&self) -> &NormalMode {
        &self.modes[self.b_index]
    }
    pub fn c(&self) -> &NormalMode {
        &self.modes[self.c_index]
    }
    pub fn d(&self) -> &NormalMode {
        &self.modes[self.d_index]
    }
}

pub fn build_catalog(spec: &CircuitSpec, band: [f64; 2]) -> Result<ModeCatalog> {
    build_catalog_with(spec, Bridge::BALANCED, band, spec.default_grid(band))
}

/// Scans all three ports, merges the modes and labels them.
pub fn build_catalog_with(spec: &CircuitSpec, bridge: Bridge, band: [f64; 2], grid_pts: usize) -> Result<ModeCatalog> {
    let spec = spec.validated()?;
    // A lossy mode's admittance zero moves by up to about its linewidth
    // between ports; keep the copy found where the mode is most visible.
    let mut modes: Vec<NormalMode> = Vec::new();
    for port in PORTS {
        for m in find_normal_modes_with(&spec, bridge, port, band, grid_pts)? {
            let native = PORTS.iter().all(|&q| m.z_eff(port) >= m.z_eff(q));
            let same = |o: &NormalMode| {
                (o.omega - m.omega).abs() < MERGE_REL_TOL * m.omega + 2.0 * o.kappa.abs().max(m.kappa.abs())
            };
            match modes.iter().position(same) {
                Some(i) if native => modes[i] = m,
                Some(_) => {}
                None => modes.push(m),
            }
        }
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));

    let argmax = |f: fn(&NormalMode) -> f64| {
        modes
            .iter()
            .enumerate()
            .filter(|(_, m)| f(m) > 0.0)
            .max_by(|a, b| f(a.1).total_cmp(&f(b.1)))
            .map(|(i, _)| i)
    };
    let a_index = argmax(|m| m.z_eff_a).ok_or(Error::NoCavityMode {
        lo: band[0],
        hi: band[1],
    })?;
    let b_index = argmax(|m| m.z_eff_b).ok_or(Error::invalid("band", "no readout mode in band"))?;
    let a = modes[a_index];
    let p_a = a.z_eff_a / spec.cavity_impedance();
    if p_a < AVOIDED_CROSSING_P_A {
        return Err(Error::AvoidedCrossing { p_a });
    }

    let line: Vec<usize> = (0..modes.len()).filter(|&i| i != a_index && i != b_index).collect();
    let c_index = line
        .iter()
        .copied()
        .rev()
        .find(|&i| modes[i].omega < a.omega)
        .ok_or(Error::invalid("band", "no line mode below the cavity"))?;
    let d_index = line
        .iter()
        .copied()
        .find(|&i| modes[i].omega > a.omega)
        .ok_or(Error::invalid("band", "no line mode above the cavity"))?;
    let mut gaps: Vec<f64> = line.windows(2).map(|w| modes[w[1]].omega - modes[w[0]].omega).collect();
    gaps.sort_by(f64::total_cmp);
    let fsr = if gaps.is_empty() {
        f64::NAN
    } else {
        gaps[gaps.len() / 2]
    };

    for (k, &i) in line.iter().enumerate() {
        modes[i].label = ModeLabel::Tl(k);
    }
    modes[a_index].label = ModeLabel::A;
    modes[b_index].label = ModeLabel::B;
    modes[c_index].label = ModeLabel::C;
    modes[d_index].label = ModeLabel::D;

    Ok(ModeCatalog {
        delta_ca: modes[c_index].omega - a.omega,
        delta_da: modes[d_index].omega - a.omega,
        kappa_l: a.kappa,
        kappa_m: spec.kappa_b0(),
        modes,
        a_index,
        b_index,
        c_index,
        d_index,
        p_a,
        fsr,
        band,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    /// Target cavity loss rate, rad/s.
    pub kappa_l_target: f64,
    pub p_a_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibrated {
    pub spec: CircuitSpec,
    pub kappa_l: f64,
    pub p_a: f64,
    pub iterations: usize,
}

/// Adjusts `R_A` by secant iteration on `1/R_A` until `κ_A` hits the target.
pub fn calibrate(spec: &CircuitSpec, targets: &CalibrationTargets) -> Result<Calibrated> {
    calibrate_in(spec, targets, spec.default_band())
}

pub fn calibrate_in(spec: &CircuitSpec, targets: &CalibrationTargets, band: [f64; 2]) -> Result<Calibrated> {
    const R_BOUNDS: [f64; 2] = [1e-3, 1e15];
    let target = targets.kappa_l_target;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::TargetUnreachable(format!(
            "kappa target {target} is not a positive loss rate"
        )));
    }
    let grid = spec.default_grid(band);
    let kappa_at = |x: f64| -> Result<(f64, f64)> {
        let s = CircuitSpec {
            cavity: Cavity {
                r_a: 1.0 / x,
                ..spec.cavity
            },
            ..*spec
        };
        let cat = build_catalog_with(&s, Bridge::BALANCED, band, grid)?;
        Ok((cat.kappa_l, cat.p_a))
    };
    // κ_A is proportional to 1/R_A to leading order, so two points seed a good secant
    let x0 = 1.0 / spec.cavity.r_a.clamp(R_BOUNDS[0], R_BOUNDS[1]);
    let x0 = if x0 > 1.0 / R_BOUNDS[1] { x0 } else { 1e-6 };
    let (k0, _) = kappa_at(x0)?;
    let mut xs = [x0, x0 * target / k0];
    let mut fs = [k0 - target, 0.0];
    for it in 1..60 {
        let x = xs[1];
        if !(x > 1.0 / R_BOUNDS[1] && x < 1.0 / R_BOUNDS[0]) {
            return Err(Error::TargetUnreachable(format!(
                "R_A = {:e} ohm outside [{:e}, {:e}]",
                1.0 / x,
                R_BOUNDS[0],
                R_BOUNDS[1]
            )));
        }
        let (k, p_a) = kappa_at(x)?;
        fs[1] = k - target;
        if (fs[1] / target).abs() < 1e-9 {
            if p_a < targets.p_a_min {
                return Err(Error::TargetUnreachable(format!(
                    "self-participation {p_a:.4} below the required {}",
                    targets.p_a_min
                )));
            }
            return Ok(Calibrated {
                spec: CircuitSpec {
                    cavity: Cavity {
                        r_a: 1.0 / x,
                        ..spec.cavity
                    },
                    ..*spec
                },
                kappa_l: k,
                p_a,
                iterations: it,
            });
        }
        let next = if fs[1] == fs[0] {
            x * target / k
        } else {
            x - fs[1] * (xs[1] - xs[0]) / (fs[1] - fs[0])
        };
        xs = [x, next];
        fs = [fs[1], 0.0];
    }
    Err(Error::TargetUnreachable("secant iteration did not converge".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub label: ModeLabel,
    pub omega: f64,
    /// State-swap rate with the readout, rad/s.
    pub g: f64,
    /// Two-mode-squeezing rate with the readout, rad/s.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionTable {
    pub rows: Vec<RateRow>,
    /// Catalog of the statically renormalized network the rates derive from.
    pub catalog: ModeCatalog,
    pub warnings: Vec<String>,
}

impl InteractionTable {
    pub fn get(&self, label: ModeLabel) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// First-order rates `g_iB = ℓ_Δ √(Z_eff(i,tl) Z_eff(B,b)) / (4L₀)` and the
/// same with `ℓ_Σ` for `h_iB`, using effective impedances of the network with
/// the bridge at its time-averaged inductance.
pub fn interaction_rates(catalog: &ModeCatalog, spec: &CircuitSpec, drive: &DriveSpec) -> Result<InteractionTable> {
    let drive = drive.validated()?;
    let ren = build_catalog_with(
        spec,
        Bridge::averaged(&drive),
        catalog.band,
        spec.default_grid(catalog.band),
    )?;
    Ok(rates_from(ren, spec, &drive))
}

pub(crate) fn rates_from(ren: ModeCatalog, spec: &CircuitSpec, drive: &DriveSpec) -> InteractionTable {
    let zb = ren.b().z_eff_b;
    let l0 = spec.readout.l0;
    let rows = ren
        .modes
        .iter()
        .filter(|m| m.label != ModeLabel::B)
        .map(|m| {
            let s = (m.z_eff_tl * zb).sqrt() / (4.0 * l0);
            RateRow {
                label: m.label,
                omega: m.omega,
                g: drive.ell_delta * s,
                h: drive.ell_sigma * s,
            }
        })
        .collect();
    InteractionTable {
        rows,
        catalog: ren,
        warnings: drive.warnings(),
    }
}
