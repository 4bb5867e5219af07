//! Dense frequency-domain solver for linear networks of coupled modes.
//!
//! Each mode carries a detuning in the working frame and any number of ports.
//! Modes couple through a Hermitian beam-splitter matrix `G` and a symmetric
//! two-mode-squeezing matrix `H`. The equations of motion
//!
//! ```text
//! dX_k/dt = -(i δ_k + κ_k/2) X_k - i Σ_l (G_kl X_l + H_kl X_l†) + Σ_p √κ_p ξ_p
//! ```
//!
//! are Fourier transformed together with their conjugates and solved as one
//! linear system. Outputs follow `ξ_out = ξ_in - √κ_p X`.
//!
//! Vector ordering for inputs and outputs is `[p_0, …, p_{P-1}, p_{P-1}†, …, p_0†]`,
//! i.e. the conjugate half is the mirror image of the direct half.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Port {
    pub mode: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct LinearNetwork {
    detunings: Vec<f64>,
    ports: Vec<Port>,
    swap: DMatrix<Complex64>,
    squeeze: DMatrix<Complex64>,
}

impl LinearNetwork {
    pub fn new(detunings: Vec<f64>, ports: Vec<Port>) -> Self {
        let n = detunings.len();
        LinearNetwork {
            detunings,
            ports,
            swap: DMatrix::zeros(n, n),
            squeeze: DMatrix::zeros(n, n),
        }
    }

    /// Adds a beam-splitter coupling `g` between modes `k` and `l`.
    pub fn swap(mut self, k: usize, l: usize, g: Complex64) -> Self {
        self.swap[(k, l)] += g;
        self.swap[(l, k)] += g.conj();
        self
    }

    /// Adds a two-mode-squeezing coupling `h` between modes `k` and `l`.
    pub fn squeeze(mut self, k: usize, l: usize, h: Complex64) -> Self {
        self.squeeze[(k, l)] += h;
        self.squeeze[(l, k)] += h;
        self
    }

    pub fn modes(&self) -> usize {
        self.detunings.len()
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    /// Full `2P × 2P` scattering matrix at detuning `omega`.
    pub fn scattering(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.modes();
        let np = self.ports.len();
        let bar = |k: usize| 2 * n - 1 - k;
        let pbar = |p: usize| 2 * np - 1 - p;

        let mut damping = vec![0.0; n];
        for port in &self.ports {
            damping[port.mode] += port.kappa;
        }

        let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for k in 0..n {
            m[(k, k)] += I * (omega + self.detunings[k]) + damping[k] / 2.0;
            m[(bar(k), bar(k))] += I * (omega - self.detunings[k]) + damping[k] / 2.0;
            for l in 0..n {
                let g = self.swap[(k, l)];
                let h = self.squeeze[(k, l)];
                m[(k, l)] += I * g;
                m[(k, bar(l))] += I * h;
                m[(bar(k), bar(l))] -= I * g.conj();
                m[(bar(k), l)] -= I * h.conj();
            }
        }

        let mut drive = DMatrix::<Complex64>::zeros(2 * n, 2 * np);
        let mut pick = DMatrix::<Complex64>::zeros(2 * np, 2 * n);
        for (p, port) in self.ports.iter().enumerate() {
            let s = Complex64::from(port.kappa.sqrt());
            drive[(port.mode, p)] = s;
            drive[(bar(port.mode), pbar(p))] = s;
            pick[(p, port.mode)] = s;
            pick[(pbar(p), bar(port.mode))] = s;
        }

        let modes = m
            .lu()
            .solve(&drive)
            .filter(|x| x.iter().all(|z| z.is_finite()))
            .ok_or(Error::SingularSystem { omega })?;
        Ok(DMatrix::identity(2 * np, 2 * np) - pick * modes)
    }
}

/// Largest elementwise deviation of `ζ J ζ†` from `J`, with `J = diag(+1…, −1…)`.
pub fn commutator_defect(zeta: &DMatrix<Complex64>) -> f64 {
    let n = zeta.nrows();
    let j = DMatrix::<Complex64>::from_fn(n, n, |r, c| {
        if r != c {
            Complex64::from(0.0)
        } else if r < n / 2 {
            Complex64::from(1.0)
        } else {
            Complex64::from(-1.0)
        }
    });
    let d = zeta * &j * zeta.adjoint() - j;
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Symmetrized spectral density of the quadrature `Y_θ` of output row `row`.
///
/// Inputs are assumed uncorrelated thermal states with occupations `occupation`
/// given in the direct-half port order, so `S = Σ_k |w_k|² (n_k + ½)` where
/// `w_k = (e^{-iθ} ζ_{row,k} − e^{iθ} ζ_{row†,k}) / (√2 i)`.
pub fn quadrature_psd(zeta: &DMatrix<Complex64>, row: usize, theta: f64, occupation: &[f64]) -> f64 {
    let np = zeta.nrows() / 2;
    let row_bar = 2 * np - 1 - row;
    let e = Complex64::from_polar(1.0, theta);
    (0..2 * np)
        .map(|k| {
            let w = (e.conj() * zeta[(row, k)] - e * zeta[(row_bar, k)]) / (I * 2f64.sqrt());
            let n = if k < np {
                occupation[k]
            } else {
                occupation[2 * np - 1 - k]
            };
            w.norm_sqr() * (n + 0.5)
        })
        .sum()
}
