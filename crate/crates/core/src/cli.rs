//! Command line front end: reads a TOML config, runs one computation and
//! writes CSV tables plus a JSON run manifest into the output directory.
//!
//! Config sections:
//!
//! * `[two_mode]` cavity/readout rates in units of `κ_ℓ` (see [`TwoModeParams`]).
//! * `[four_mode]` optional explicit extended-model rates in units of `κ_ℓ`.
//! * `[drive]` fractional modulation depths `ell_delta`, `ell_sigma` and phase `phi`.
//! * `[circuit]` element values in SI units, frequencies in Hz (see [`CircuitConfig`]).
//! * `[sweep]` grids for the sweep commands; every key has a default (see [`SweepConfig`]).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::circuit::{self, Cavity, CircuitSpec, DriveSpec, Ladder, Line, Readout, C0};
use crate::error::{Error, Result};
use crate::four_mode::{self, FourModeParams};
use crate::langevin_core::{self as lc, QuadratureAngle, TwoModeParams};
use crate::scanrate::{self, MismatchModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Visibility curves of the two-mode readout and the standard haloscope.
    TwoMode,
    /// Enhancement over matched rate and overcoupling, with the optimal ridge.
    ScanMap,
    /// Reflection map over mismatched cooperativities and E versus g/h.
    Mismatch,
    /// Normal-mode catalog of the circuit and its interaction rates.
    Circuit,
    /// Extended-model visibility and enhancement.
    FourMode,
    /// Enhancement across one FSR and across line lengths.
    FsrSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TwoMode => "two-mode",
            Command::ScanMap => "scan-map",
            Command::Mismatch => "mismatch",
            Command::Circuit => "circuit",
            Command::FourMode => "four-mode",
            Command::FsrSweep => "fsr-sweep",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ceasefire", version, about = "Parametric haloscope readout model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for randomized drivers; physics outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// Circuit section in SI units, frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    /// Bare cavity resonance, Hz.
    pub f_cavity: f64,
    /// Cavity characteristic impedance `√(L_A/C_A)`, ohm.
    pub z_cavity: f64,
    /// Coupling capacitor, F.
    pub c_c: f64,
    /// Cavity loss resistor, ohm.
    pub r_a: f64,
    /// Ladder characteristic impedance, ohm.
    pub z0: f64,
    pub cells: usize,
    /// Line length, m.
    pub length: f64,
    /// Phase velocity, m/s.
    #[serde(default = "speed_of_light")]
    pub v: f64,
    /// Bridge inductance, H.
    pub l0: f64,
    /// Bare readout resonance, Hz.
    pub f_readout: f64,
    /// Readout loss resistor, ohm.
    pub r_b: f64,
}

fn speed_of_light() -> f64 {
    C0
}

impl CircuitConfig {
    pub fn to_spec(&self) -> Result<CircuitSpec> {
        let wa = 2.0 * PI * self.f_cavity;
        let wb = 2.0 * PI * self.f_readout;
        let line = Line {
            length: self.length,
            v: self.v,
        };
        if !(self.z0 > 0.0) {
            return Err(Error::invalid("circuit.z0", "must be > 0"));
        }
        if self.cells < 2 {
            return Err(Error::invalid("circuit.cells", "must be >= 2"));
        }
        CircuitSpec {
            cavity: Cavity {
                l_a: self.z_cavity / wa,
                c_a: 1.0 / (self.z_cavity * wa),
                c_c: self.c_c,
                r_a: self.r_a,
            },
            ladder: Ladder::from_line(self.z0, self.cells, &line),
            readout: Readout {
                l0: self.l0,
                c_b: 1.0 / (wb * wb * self.l0),
                r_b: self.r_b,
            },
            line,
        }
        .validated()
    }

    pub fn from_spec(spec: &CircuitSpec) -> Self {
        CircuitConfig {
            f_cavity: spec.cavity_omega() / (2.0 * PI),
            z_cavity: spec.cavity_impedance(),
            c_c: spec.cavity.c_c,
            r_a: spec.cavity.r_a,
            z0: spec.ladder.z0(),
            cells: spec.ladder.n,
            length: spec.line.length,
            v: spec.line.v,
            l0: spec.readout.l0,
            f_readout: spec.readout_omega() / (2.0 * PI),
            r_b: spec.readout.r_b,
        }
    }
}

/// Sweep grids. Rates are in units of `κ_ℓ`, circuit quantities in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Visibility grid half-width, `κ_ℓ`.
    pub omega_max: f64,
    /// Odd, so the grid contains `ω = 0`.
    pub omega_points: usize,
    pub g_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    /// Overcoupling search range for the optimum at `two_mode.g`.
    pub kappa_m_range: [f64; 2],
    /// Cooperativities for the mismatch reflection map.
    pub c_grid: Vec<f64>,
    /// `g/h` values for the mismatch enhancement sweep.
    pub mismatch_ratios: Vec<f64>,
    /// Retune the cavity to the midpoint of its line modes before running.
    pub center: bool,
    pub detuning_points: usize,
    /// Bare-frequency span of the detuning sweep, in units of the ideal FSR.
    pub detuning_span_fsr: f64,
    /// Half-width of the averaging window, Hz.
    pub window_half_width: f64,
    /// Line lengths, m.
    pub lengths: Vec<f64>,
    pub length_points: usize,
    /// Bare-frequency span of each length curve, in units of the first length's FSR.
    pub length_span_fsr: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            omega_max: 300.0,
            omega_points: 601,
            g_grid: linspace(10.0, 200.0, 20),
            ratio_grid: linspace(2.0, 60.0, 30),
            kappa_m_range: [1.0, 1000.0],
            c_grid: linspace(0.0, 4.0, 41),
            mismatch_ratios: linspace(0.95, 1.05, 41),
            center: true,
            detuning_points: 121,
            detuning_span_fsr: 1.2,
            window_half_width: 50e6,
            lengths: vec![0.5, 0.55, 0.6, 0.65, 0.7],
            length_points: 161,
            length_span_fsr: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub two_mode: Option<TwoModeParams>,
    pub four_mode: Option<FourModeParams>,
    pub drive: Option<DriveSpec>,
    pub circuit: Option<CircuitConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn need<'a, T>(section: &'a Option<T>, key: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| Error::Config {
        key: key.to_string(),
        reason: "section is required by this command".into(),
    })
}

/// Parses a config document; the error names the offending key.
pub fn parse_config(text: &str) -> Result<Config> {
    let cfg: Config = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".into());
        Error::Config { key, reason: msg }
    })?;
    if cfg.sweep.omega_points.is_multiple_of(2) {
        return Err(Error::Config {
            key: "sweep.omega_points".into(),
            reason: "must be odd so the grid contains zero".into(),
        });
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved config serialized as TOML.
    pub config_digest: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub wall_time: f64,
    pub version: String,
    pub seed: u64,
    pub units: Vec<String>,
}

/// Digest of the resolved config, reproducible from its TOML serialization.
pub fn config_digest(cfg: &Config) -> Result<String> {
    let text = toml::to_string(cfg).map_err(|e| Error::Config {
        key: "<document>".into(),
        reason: e.to_string(),
    })?;
    Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
}

enum Cell {
    F(f64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::F(v.unwrap_or(f64::NAN))
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(if v { "1" } else { "0" }.into())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Table {
    name: &'static str,
    columns: &'static [(&'static str, &'static str)],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &'static str, columns: &'static [(&'static str, &'static str)]) -> Self {
        Table {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let header: Vec<String> = self.columns.iter().map(|(c, u)| format!("{c}:{u}")).collect();
        let mut s = format!("# {}\n", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::F(v) => fmt_f(*v),
                    Cell::S(t) => t.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<OutputFile>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, body: &str, rows: usize, columns: usize) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(OutputFile {
            path: path.display().to_string(),
            rows,
            columns,
        });
        Ok(())
    }

    fn table(&mut self, t: &Table) -> Result<()> {
        let name = format!("{}.csv", t.name);
        self.write(&name, &t.render(), t.rows.len(), t.columns.len())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let body = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))? + "\n";
        let n = value.as_object().map_or(1, |o| o.len());
        self.write(name, &body, n, 1)
    }
}

fn omega_grid(s: &SweepConfig) -> Result<Vec<f64>> {
    if !(s.omega_max > 0.0) || s.omega_points < 3 {
        return Err(Error::Config {
            key: "sweep.omega_max".into(),
            reason: "need omega_max > 0 and at least 3 points".into(),
        });
    }
    Ok(linspace(-s.omega_max, s.omega_max, s.omega_points))
}

/// Resolves the circuit from the config, centering the cavity when asked.
pub fn resolve_circuit(cfg: &Config) -> Result<(CircuitSpec, DriveSpec)> {
    let spec = need(&cfg.circuit, "circuit")?.to_spec()?;
    let drive = need(&cfg.drive, "drive")?.validated()?;
    let spec = if cfg.sweep.center {
        four_mode::center_cavity(&spec, &drive)?
    } else {
        spec
    };
    Ok((spec, drive))
}

fn run_two_mode(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let p = need(&cfg.two_mode, "two_mode")?.validated()?;
    let grid = omega_grid(&cfg.sweep)?;
    let cf = lc::visibility(&grid, &p, lc::VisibilityMode::Ceasefire)?;
    let crit = lc::visibility(&grid, &p, lc::VisibilityMode::Standard { kappa_c: p.kappa_l })?;
    let over = lc::visibility(
        &grid,
        &p,
        lc::VisibilityMode::Standard {
            kappa_c: 2.0 * p.kappa_l,
        },
    )?;
    let theta = QuadratureAngle::amplified(&p);
    let mut t = Table::new(
        "visibility",
        &[
            ("omega", "kappa_l"),
            ("alpha_cf", "1"),
            ("alpha_std_critical", "1"),
            ("alpha_std_overcoupled", "1"),
            ("s_axion", "quanta"),
            ("s_noise", "quanta"),
        ],
    );
    for (i, &w) in grid.iter().enumerate() {
        let s = lc::output_psd(w, theta, &p)?;
        t.push(vec![
            w.into(),
            cf.alphas[i].into(),
            crit.alphas[i].into(),
            over.alphas[i].into(),
            s.s_axion.into(),
            s.s_noise.into(),
        ]);
    }
    out.table(&t)?;
    let e = scanrate::enhancement(&p)?;
    Ok(json!({ "params": p, "enhancement": e, "alpha_cf_at_zero": lc::alpha_ceasefire(0.0, &p)? }))
}

fn run_scan_map(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let s = &cfg.sweep;
    let map = scanrate::enhancement_map(&s.g_grid, &s.ratio_grid)?;
    let mut t = Table::new(
        "scan_map",
        &[
            ("g", "kappa_l"),
            ("kappa_m", "kappa_l"),
            ("enhancement", "1"),
            ("oscillating", "bool"),
        ],
    );
    for c in &map.cells {
        t.push(vec![
            c.g.into(),
            c.ratio.into(),
            c.value.into(),
            c.value.is_none().into(),
        ]);
    }
    out.table(&t)?;
    let mut r = Table::new(
        "ridge",
        &[("g", "kappa_l"), ("kappa_m_opt", "kappa_l"), ("enhancement", "1")],
    );
    for p in &map.ridge {
        r.push(vec![p.g.into(), p.ratio_opt.into(), p.e_opt.into()]);
    }
    out.table(&r)?;
    let optimum = match &cfg.two_mode {
        Some(p) => {
            let p = p.validated()?;
            Some(scanrate::optimize_overcoupling(p.g, p.kappa_l, s.kappa_m_range)?)
        }
        None => None,
    };
    Ok(json!({ "optimum": optimum }))
}

fn run_mismatch(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let p = need(&cfg.two_mode, "two_mode")?.validated()?;
    let s = &cfg.sweep;
    let cells: Vec<scanrate::MismatchPoint> = s
        .c_grid
        .iter()
        .flat_map(|&cg| s.c_grid.iter().map(move |&ch| (cg, ch)))
        .map(|(cg, ch)| scanrate::mismatch_reflection(cg, ch, &p))
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "mismatch_map",
        &[
            ("c_g", "1"),
            ("c_h", "1"),
            ("epsilon", "1"),
            ("chi_mm0", "1"),
            ("refl_sq", "1"),
            ("oscillating", "bool"),
        ],
    );
    for c in &cells {
        t.push(vec![
            c.c_g.into(),
            c.c_h.into(),
            c.epsilon.into(),
            c.chi_mm0.into(),
            c.refl_sq.into(),
            c.oscillating.into(),
        ]);
    }
    out.table(&t)?;
    let sweep = scanrate::mismatch_enhancement_sweep(p.h, p.kappa_m, &s.mismatch_ratios, &MismatchModel::TwoMode)?;
    let mut u = Table::new(
        "mismatch_sweep",
        &[
            ("g_over_h", "1"),
            ("epsilon", "1"),
            ("enhancement", "1"),
            ("oscillating", "bool"),
        ],
    );
    for r in &sweep.rows {
        u.push(vec![
            r.ratio.into(),
            r.epsilon.into(),
            r.enhancement.into(),
            r.oscillating.into(),
        ]);
    }
    out.table(&u)?;
    Ok(json!({ "h": p.h, "kappa_m": p.kappa_m, "argmax_g_over_h": sweep.argmax_ratio }))
}

fn label(l: circuit::ModeLabel) -> String {
    match l {
        circuit::ModeLabel::Tl(k) => format!("tl{k}"),
        other => format!("{other:?}"),
    }
}

fn run_circuit(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let spec = need(&cfg.circuit, "circuit")?.to_spec()?;
    let cat = circuit::build_catalog(&spec, spec.default_band())?;
    let mut t = Table::new(
        "modes",
        &[
            ("label", "-"),
            ("f", "Hz"),
            ("z_eff_a", "ohm"),
            ("z_eff_b", "ohm"),
            ("z_eff_tl", "ohm"),
            ("q", "1"),
            ("kappa", "Hz"),
        ],
    );
    for m in &cat.modes {
        t.push(vec![
            label(m.label).into(),
            (m.omega / (2.0 * PI)).into(),
            m.z_eff_a.into(),
            m.z_eff_b.into(),
            m.z_eff_tl.into(),
            m.q.into(),
            (m.kappa / (2.0 * PI)).into(),
        ]);
    }
    out.table(&t)?;
    let mut result = json!({ "spec": spec, "catalog": cat, "fsr_ideal_hz": spec.fsr_hz() });
    if let Some(drive) = &cfg.drive {
        let table = circuit::interaction_rates(&cat, &spec, drive)?;
        let k = table.catalog.kappa_l;
        let mut r = Table::new(
            "rates",
            &[
                ("label", "-"),
                ("f", "Hz"),
                ("g", "Hz"),
                ("h", "Hz"),
                ("g", "kappa_l"),
                ("h", "kappa_l"),
            ],
        );
        for row in &table.rows {
            r.push(vec![
                label(row.label).into(),
                (row.omega / (2.0 * PI)).into(),
                (row.g / (2.0 * PI)).into(),
                (row.h / (2.0 * PI)).into(),
                (row.g / k).into(),
                (row.h / k).into(),
            ]);
        }
        out.table(&r)?;
        result["warnings"] = json!(table.warnings);
        result["renormalized_catalog"] = json!(table.catalog);
    }
    Ok(result)
}

/// Extended-model parameters: the explicit `[four_mode]` section if present,
/// otherwise derived from the circuit and drive.
pub fn resolve_four_mode(cfg: &Config) -> Result<(FourModeParams, Option<four_mode::CircuitDerived>)> {
    if let Some(p) = &cfg.four_mode {
        return Ok((p.validated()?, None));
    }
    let (spec, drive) = resolve_circuit(cfg)?;
    let d = four_mode::params_from_circuit(&spec, &drive, spec.default_band())?;
    Ok((d.params, Some(d)))
}

fn run_four_mode(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let (p, derived) = resolve_four_mode(cfg)?;
    let grid = omega_grid(&cfg.sweep)?;
    let theta = four_mode::amplified_angle4(&p)?;
    let tm = p.two_mode_part();
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&w| {
            let s = four_mode::output_psd4(w, theta, &p)?;
            let a = s.s_axion / (s.s_noise + lc::follow_on_noise(p.n_t));
            Ok(vec![
                w,
                p.p_a * a,
                lc::alpha_standard(w, 2.0 * p.kappa_l, &tm),
                s.s_axion,
                s.s_noise,
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "visibility4",
        &[
            ("omega", "kappa_l"),
            ("alpha_cf_weighted", "1"),
            ("alpha_std_overcoupled", "1"),
            ("s_axion", "quanta"),
            ("s_noise", "quanta"),
        ],
    );
    for r in rows {
        t.push(r.into_iter().map(Cell::from).collect());
    }
    out.table(&t)?;
    let e = four_mode::enhancement4(&p)?;
    let mut result = json!({ "params": p, "theta": theta.radians(), "enhancement": e });
    if let Some(d) = derived {
        result["kappa_l_hz"] = json!(d.kappa_l / (2.0 * PI));
        result["f_a_hz"] = json!(d.catalog.a().omega / (2.0 * PI));
        result["midpoint_offset_hz"] = json!(four_mode::midpoint_offset(&d.catalog) / (2.0 * PI));
        result["warnings"] = json!(d.warnings);
    }
    Ok(result)
}

fn sweep_table(name: &'static str, points: &[four_mode::CircuitSweepPoint], length: Option<f64>) -> Table {
    let mut t = Table::new(
        name,
        &[
            ("length", "m"),
            ("f_bare", "Hz"),
            ("f_a", "Hz"),
            ("delta_a", "Hz"),
            ("p_a", "1"),
            ("kappa_l", "Hz"),
            ("g_ab", "kappa_l"),
            ("g_cb", "kappa_l"),
            ("g_db", "kappa_l"),
            ("enhancement", "1"),
            ("flagged", "bool"),
        ],
    );
    for p in points {
        t.push(vec![
            length.unwrap_or(f64::NAN).into(),
            p.f_bare.into(),
            p.f_a.into(),
            p.delta_a_hz.into(),
            p.p_a.into(),
            p.kappa_l_hz.into(),
            p.g_ab.into(),
            p.g_cb.into(),
            p.g_db.into(),
            p.enhancement.into(),
            p.flag.is_some().into(),
        ]);
    }
    t
}

/// Bare-frequency grid of `n` points spanning `span` Hz around `f0`.
pub fn bare_grid(f0: f64, span: f64, n: usize) -> Vec<f64> {
    linspace(f0 - span / 2.0, f0 + span / 2.0, n)
}

/// Mean enhancement over `|Δ_A| ≤ half` from a circuit sweep, `None` if any
/// point inside the window is flagged or the window is not covered.
pub fn circuit_window_average(points: &[four_mode::CircuitSweepPoint], half: f64) -> Option<f64> {
    // flagged points carry no offset, so locate them by bare frequency
    let inside: Vec<f64> = points
        .iter()
        .filter(|p| p.delta_a_hz.abs() <= half)
        .map(|p| p.f_bare)
        .collect();
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside_flagged = points
        .iter()
        .any(|p| p.enhancement.is_none() && p.f_bare >= lo && p.f_bare <= hi);
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.enhancement.map(|e| (p.delta_a_hz, e)))
        .filter(|(d, _)| d.abs() <= 2.0 * half)
        .collect();
    if inside_flagged {
        return None;
    }
    four_mode::window_average(&xy, 0.0, half)
}

fn run_fsr_sweep(cfg: &Config, out: &mut Outputs) -> Result<serde_json::Value> {
    let (spec, drive) = resolve_circuit(cfg)?;
    let s = &cfg.sweep;
    let f0 = spec.cavity_omega() / (2.0 * PI);
    let fsr = spec.fsr_hz();
    let pts = four_mode::circuit_detuning_sweep(
        &spec,
        &drive,
        &bare_grid(f0, s.detuning_span_fsr * fsr, s.detuning_points),
    )?;
    out.table(&sweep_table("fsr_sweep", &pts, Some(spec.line.length)))?;
    let peak = pts
        .iter()
        .filter_map(|p| p.enhancement.map(|e| (p.delta_a_hz, e)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let avg = circuit_window_average(&pts, s.window_half_width);

    let ls = four_mode::length_sweep(
        &spec,
        &drive,
        &s.lengths,
        &bare_grid(f0, s.length_span_fsr * fsr, s.length_points),
    )?;
    let mut t = sweep_table("length_sweep", &[], None);
    for c in &ls.curves {
        let part = sweep_table("length_sweep", &c.points, Some(c.length));
        t.rows.extend(part.rows);
    }
    out.table(&t)?;
    let mut env = Table::new("envelope", &[("f_a", "Hz"), ("enhancement", "1")]);
    for &(f, e) in &ls.envelope {
        env.push(vec![f.into(), e.into()]);
    }
    out.table(&env)?;
    let curves: Vec<serde_json::Value> = ls
        .curves
        .iter()
        .map(|c| json!({ "length": c.length, "fsr_hz": c.fsr_hz, "peak": c.peak }))
        .collect();
    Ok(json!({
        "spec": CircuitConfig::from_spec(&spec),
        "fsr_ideal_hz": fsr,
        "peak_delta_a_hz": peak.map(|p| p.0),
        "peak_enhancement": peak.map(|p| p.1),
        "window_half_width_hz": s.window_half_width,
        "window_average": avg,
        "lengths": curves,
    }))
}

/// Runs `command` and writes its tables, `results.json` and `manifest.json`
/// into `out_dir`.
pub fn run(command: Command, cfg: &Config, out_dir: &Path, seed: u64) -> Result<RunManifest> {
    let start = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut out = Outputs {
        dir: out_dir,
        files: Vec::new(),
    };
    let result = match command {
        Command::TwoMode => run_two_mode(cfg, &mut out),
        Command::ScanMap => run_scan_map(cfg, &mut out),
        Command::Mismatch => run_mismatch(cfg, &mut out),
        Command::Circuit => run_circuit(cfg, &mut out),
        Command::FourMode => run_four_mode(cfg, &mut out),
        Command::FsrSweep => run_fsr_sweep(cfg, &mut out),
    }?;
    out.json("results.json", &result)?;
    let manifest = RunManifest {
        command: command.name().into(),
        config_digest: config_digest(cfg)?,
        parameters: serde_json::to_value(cfg).map_err(|e| Error::Io(e.to_string()))?,
        outputs: out.files,
        wall_time: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        units: vec![
            "two_mode, four_mode and sweep rates: multiples of kappa_l".into(),
            "circuit section and circuit-derived frequencies: Hz (f = omega/2pi), elements SI".into(),
            "circuit-derived rates g, h: divided by the cavity loss rate kappa_A of the same catalog".into(),
        ],
    };
    let path = out_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))? + "\n";
    fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let go = || -> Result<RunManifest> {
        let path = cli.config.as_ref().ok_or_else(|| Error::Config {
            key: "--config".into(),
            reason: "a config file is required".into(),
        })?;
        let cfg = load_config(path)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| Error::Config {
                key: "--threads".into(),
                reason: e.to_string(),
            })?;
        pool.install(|| run(cli.command, &cfg, &cli.out, cli.seed))
    };
    match go() {
        Ok(m) => {
            for f in &m.outputs {
                println!("{} ({} rows)", f.path, f.rows);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_named() {
        let e = parse_config("[two_mode]\ng = 1.0\nh = 1.0\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("kappa_m"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("[sweep]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn even_grid_is_rejected() {
        assert!(parse_config("[sweep]\nomega_points = 10\n").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            let s = fmt_f(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f(f64::NAN), "nan");
    }

    #[test]
    fn digest_is_stable() {
        let a = parse_config("[two_mode]\nkappa_m = 19.0\ng = 1.0\nh = 1.0\n").unwrap();
        let b = parse_config("[two_mode]\nh = 1.0\ng = 1.0\nkappa_m = 19.0\n").unwrap();
        assert_eq!(config_digest(&a).unwrap(), config_digest(&b).unwrap());
    }

    #[test]
    fn circuit_config_round_trips() {
        let c = CircuitConfig {
            f_cavity: 5e9,
            z_cavity: 100.0,
            c_c: 3e-14,
            r_a: 1e6,
            z0: 50.0,
            cells: 400,
            length: 0.5,
            v: C0,
            l0: 5e-10,
            f_readout: 7.05e9,
            r_b: 1e5,
        };
        let back = CircuitConfig::from_spec(&c.to_spec().unwrap());
        assert!((back.f_cavity - c.f_cavity).abs() < 1e-3);
        assert!((back.f_readout - c.f_readout).abs() < 1e-3);
        assert!((back.z0 - 50.0).abs() < 1e-9);
    }
}
