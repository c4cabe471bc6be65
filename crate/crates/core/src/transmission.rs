//! Feedline transmission S21(omega, B) from input-output theory: the
//! closed form for a resonator pair, the general complex linear solve
//! including direct (complex) spin-feedline couplings, 2-D map
//! generation and per-branch visibility extraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ChipConfig, LerParams};
use crate::spectrum::{FieldPoint, PolaritonBranch, SingleExcitationBasis, SlotLabel};

#[derive(Debug, Error)]
pub enum TransmissionError {
    #[error("closed form requires a two-LER chip, found {n} LERs")]
    NotAPair { n: usize },
    #[error("closed form is valid only for gamma_c = 0; LER {ler} has gamma_c = {gamma_c} MHz (use s21_general)")]
    NonzeroGammaC { ler: usize, gamma_c: f64 },
    #[error("response matrix is singular at omega = {omega_mhz} MHz (zero losses?)")]
    Singular { omega_mhz: f64 },
    #[error("frequency grid must be strictly increasing and finite")]
    BadGrid,
    #[error("map size {points} points exceeds the configured cap of {max} (omega x B = {n_omega} x {n_b})")]
    MapTooLarge {
        points: usize,
        max: usize,
        n_omega: usize,
        n_b: usize,
    },
    #[error("branches were tracked on a different field grid than the map")]
    GridMismatch,
    #[error(
        "visibility window [{lo} MHz, {hi} MHz] around branch {branch} at B = {b_mt} mT \
         extends outside the map's frequency grid"
    )]
    WindowOutsideGrid {
        branch: usize,
        b_mt: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Spectrum(#[from] crate::spectrum::SpectrumError),
}

/// Options of the general response solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ResponseOptions {
    /// Take the negative root of the complex spin-feedline coupling
    /// instead of the principal branch (sign studies of the dark-state
    /// interference).
    pub negative_gamma_c_root: bool,
}

/// Transmission of a single side-coupled resonator,
/// S21 = 1 - kappa_c / (i (omega_r - omega) + kappa). kappa is the
/// half-width at half-maximum of the dip.
pub fn s21_single(omega_mhz: f64, ler: &LerParams) -> Complex64 {
    let denom = Complex64::new(ler.kappa_mhz, ler.omega_r_mhz - omega_mhz);
    Complex64::new(1.0, 0.0) - ler.kappa_c_mhz / denom
}

/// Per-resonator response function
/// z_j = [i (omega_rj - omega) + kappa_j] + G_j^2 / [i (Omega_Sj - omega) + gamma_j],
/// with the bare-cavity term recovered for G_j = 0.
pub fn z_response(config: &ChipConfig, ler: usize, omega_mhz: f64, b_mt: f64) -> Complex64 {
    let l = &config.lers[ler];
    let mut z = Complex64::new(l.kappa_mhz, l.omega_r_mhz - omega_mhz);
    if let Some(spin) = &config.spins[ler] {
        let point = FieldPoint::of(config, b_mt);
        let (omega_s, g_eff) = point.spins[ler].expect("spin present");
        if g_eff != 0.0 {
            z += g_eff * g_eff / Complex64::new(spin.gamma_mhz, omega_s - omega_mhz);
        }
    }
    z
}

/// The complex-symmetric response matrix and the feedline drive vector
/// of a chip at one (omega, B) point, in single-excitation basis order.
#[derive(Debug, Clone)]
pub struct ResponseMatrix {
    pub matrix: DMatrix<Complex64>,
    /// Square roots of the per-slot feedline couplings.
    pub drive: DVector<Complex64>,
}

pub fn response_matrix(
    config: &ChipConfig,
    omega_mhz: f64,
    b_mt: f64,
    opts: ResponseOptions,
) -> ResponseMatrix {
    let basis = SingleExcitationBasis::for_config(config);
    let point = FieldPoint::of(config, b_mt);
    let dim = basis.dim();
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut drive = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (j, ler) in config.lers.iter().enumerate() {
        let p = basis.photon_slot(j);
        m[(p, p)] = Complex64::new(ler.kappa_mhz, ler.omega_r_mhz - omega_mhz);
        drive[p] = Complex64::new(ler.kappa_c_mhz.sqrt(), 0.0);
        if let Some(s) = basis.spin_slot(j) {
            let spin = config.spins[j].as_ref().expect("spin slot");
            let (omega_s, g_eff) = point.spins[j].expect("spin params");
            m[(s, s)] = Complex64::new(spin.gamma_mhz, omega_s - omega_mhz);
            m[(s, p)] = Complex64::new(0.0, g_eff);
            m[(p, s)] = Complex64::new(0.0, g_eff);
            let gamma_c = Complex64::from_polar(spin.gamma_c_mhz, spin.gamma_c_phase_rad);
            let mut root = gamma_c.sqrt();
            if opts.negative_gamma_c_root {
                root = -root;
            }
            drive[s] = root;
        }
    }
    for c in &config.couplings {
        let (pi, pj) = (basis.photon_slot(c.i - 1), basis.photon_slot(c.j - 1));
        m[(pi, pj)] = Complex64::new(0.0, c.kappa_mhz);
        m[(pj, pi)] = Complex64::new(0.0, c.kappa_mhz);
    }
    ResponseMatrix { matrix: m, drive }
}

/// General input-output transmission: solves C x = -i d for the
/// steady-state slot amplitudes (drive amplitude normalized to 1) and
/// assembles S21 = 1 - sum_slots d_slot i x_slot.
pub fn s21_general(
    config: &ChipConfig,
    omega_mhz: f64,
    b_mt: f64,
) -> Result<Complex64, TransmissionError> {
    s21_general_opts(config, omega_mhz, b_mt, ResponseOptions::default())
}

pub fn s21_general_opts(
    config: &ChipConfig,
    omega_mhz: f64,
    b_mt: f64,
    opts: ResponseOptions,
) -> Result<Complex64, TransmissionError> {
    let ResponseMatrix { matrix, drive } = response_matrix(config, omega_mhz, b_mt, opts);
    let rhs = drive.map(|d| -Complex64::i() * d);
    let lu = matrix.lu();
    let x = lu.solve(&rhs).ok_or(TransmissionError::Singular { omega_mhz })?;
    let collected: Complex64 = drive
        .iter()
        .zip(x.iter())
        .map(|(d, xi)| d * Complex64::i() * xi)
        .sum();
    Ok(Complex64::new(1.0, 0.0) - collected)
}

/// Closed-form pair transmission
/// S21 = 1 - [kc1 z2 + kc2 z1 - 2 i sqrt(kc1 kc2) kappa_12] / (z1 z2 + kappa_12^2),
/// valid for gamma_c = 0 on both spins.
pub fn s21_closed_pair(
    config: &ChipConfig,
    omega_mhz: f64,
    b_mt: f64,
) -> Result<Complex64, TransmissionError> {
    if config.n_lers() != 2 {
        return Err(TransmissionError::NotAPair { n: config.n_lers() });
    }
    for (ler, spin) in config.spins.iter().enumerate() {
        if let Some(s) = spin {
            if s.gamma_c_mhz != 0.0 {
                return Err(TransmissionError::NonzeroGammaC {
                    ler,
                    gamma_c: s.gamma_c_mhz,
                });
            }
        }
    }
    let z1 = z_response(config, 0, omega_mhz, b_mt);
    let z2 = z_response(config, 1, omega_mhz, b_mt);
    let kc1 = config.lers[0].kappa_c_mhz;
    let kc2 = config.lers[1].kappa_c_mhz;
    let k12 = config.coupling_between(0, 1);
    let num = kc1 * z2 + kc2 * z1 - Complex64::new(0.0, 2.0 * (kc1 * kc2).sqrt() * k12);
    let den = z1 * z2 + k12 * k12;
    Ok(Complex64::new(1.0, 0.0) - num / den)
}

/// Strictly increasing probe-frequency grid in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGrid {
    values: Vec<f64>,
}

impl OmegaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, TransmissionError> {
        if values.is_empty()
            || values.iter().any(|v| !v.is_finite())
            || values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(TransmissionError::BadGrid);
        }
        Ok(Self { values })
    }

    pub fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Self, TransmissionError> {
        if steps == 0 || (steps == 1 && hi != lo) || (steps > 1 && hi <= lo) {
            return Err(TransmissionError::BadGrid);
        }
        if steps == 1 {
            return Self::new(vec![lo]);
        }
        let h = (hi - lo) / (steps - 1) as f64;
        Self::new((0..steps).map(|k| lo + h * k as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Complex S21 over an (omega, B) grid, stored row-major over B then
/// omega.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMap {
    pub omega_mhz: Vec<f64>,
    pub b_mt: Vec<f64>,
    pub s21_re: Vec<f64>,
    pub s21_im: Vec<f64>,
    pub normalized: bool,
}

impl TransmissionMap {
    pub fn at(&self, b_index: usize, omega_index: usize) -> Complex64 {
        let k = b_index * self.omega_mhz.len() + omega_index;
        Complex64::new(self.s21_re[k], self.s21_im[k])
    }

    pub fn abs_at(&self, b_index: usize, omega_index: usize) -> f64 {
        self.at(b_index, omega_index).norm()
    }

    pub fn n_points(&self) -> usize {
        self.s21_re.len()
    }

    /// Normalize to the maximum |S21| over the map. Idempotent.
    pub fn normalize(&mut self) {
        let max = self
            .s21_re
            .iter()
            .zip(&self.s21_im)
            .map(|(re, im)| re.hypot(*im))
            .fold(0.0f64, f64::max);
        if max > 0.0 {
            for v in self.s21_re.iter_mut().chain(self.s21_im.iter_mut()) {
                *v /= max;
            }
        }
        self.normalized = true;
    }

    /// CSV with columns (B_mT, omega_MHz, re_S21, im_S21, abs_S21),
    /// row-major over B then omega, 12 significant digits.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "B_mT,omega_MHz,re_S21,im_S21,abs_S21")?;
        for (bi, &b) in self.b_mt.iter().enumerate() {
            for (oi, &omega) in self.omega_mhz.iter().enumerate() {
                let s = self.at(bi, oi);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_sig(b),
                    fmt_sig(omega),
                    fmt_sig(s.re),
                    fmt_sig(s.im),
                    fmt_sig(s.norm())
                )?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// 12-significant-digit float formatting used by all CSV writers.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    pub normalize: bool,
    /// Refuse maps larger than this many points.
    pub max_points: usize,
    pub response: ResponseOptions,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            max_points: 10_000_000,
            response: ResponseOptions::default(),
        }
    }
}

/// Evaluate s21_general over the full grid, in parallel over B columns.
/// Output is deterministic and independent of the thread count.
pub fn transmission_map(
    config: &ChipConfig,
    omega: &OmegaGrid,
    sweep: &crate::spectrum::FieldSweep,
    opts: MapOptions,
) -> Result<TransmissionMap, TransmissionError> {
    let n_omega = omega.values().len();
    let n_b = sweep.len();
    let points = n_omega * n_b;
    if points > opts.max_points {
        return Err(TransmissionError::MapTooLarge {
            points,
            max: opts.max_points,
            n_omega,
            n_b,
        });
    }
    let rows: Vec<Vec<Complex64>> = sweep
        .values()
        .par_iter()
        .map(|&b| {
            omega
                .values()
                .iter()
                .map(|&w| s21_general_opts(config, w, b, opts.response))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut s21_re = Vec::with_capacity(points);
    let mut s21_im = Vec::with_capacity(points);
    for row in rows {
        for s in row {
            s21_re.push(s.re);
            s21_im.push(s.im);
        }
    }
    let mut map = TransmissionMap {
        omega_mhz: omega.values().to_vec(),
        b_mt: sweep.values().to_vec(),
        s21_re,
        s21_im,
        normalized: false,
    };
    if opts.normalize {
        map.normalize();
    }
    Ok(map)
}

/// Per-branch transmission visibility v = 1 - min |S21| along the field
/// axis.
#[derive(Debug, Clone, Serialize)]
pub struct VisibilityProfile {
    pub b_mt: Vec<f64>,
    /// One visibility curve per branch, indexed like the input branches.
    pub visibility: Vec<Vec<f64>>,
}

/// Effective linewidth of a branch eigenvector: excitation-weighted
/// average of the slot losses (kappa_j for photon slots, gamma_j for
/// spin slots). Lies between the pure photon and spin linewidths.
pub fn branch_linewidth(
    config: &ChipConfig,
    basis: &SingleExcitationBasis,
    vector: &nalgebra::DVector<f64>,
) -> f64 {
    basis
        .labels()
        .iter()
        .zip(vector.iter())
        .map(|(label, &a)| {
            let loss = match label {
                SlotLabel::Photon(j) => config.lers[*j].kappa_mhz,
                SlotLabel::Spin(j) => config.spins[*j].as_ref().expect("spin").gamma_mhz,
            };
            a * a * loss
        })
        .sum()
}

/// Extract per-branch visibilities from a map: per B, v = 1 - min |S21|
/// within +-`window_linewidths` effective linewidths of the branch
/// frequency. The window is clipped at the midpoint toward the nearest
/// other branch so each dip stays attributable to its own branch.
pub fn visibility_profile(
    map: &TransmissionMap,
    branches: &[PolaritonBranch],
    config: &ChipConfig,
    window_linewidths: f64,
) -> Result<VisibilityProfile, TransmissionError> {
    if branches.iter().any(|br| br.b_mt != map.b_mt) {
        return Err(TransmissionError::GridMismatch);
    }
    let basis = SingleExcitationBasis::for_config(config);
    let (omega_lo, omega_hi) = (
        *map.omega_mhz.first().expect("non-empty grid"),
        *map.omega_mhz.last().expect("non-empty grid"),
    );
    let mut visibility = vec![Vec::with_capacity(map.b_mt.len()); branches.len()];
    for (bi, &b) in map.b_mt.iter().enumerate() {
        for (k, br) in branches.iter().enumerate() {
            let center = br.freq_mhz[bi];
            let kp = branch_linewidth(config, &basis, &br.vectors[bi]);
            let mut half_width = window_linewidths * kp;
            for (other_k, other) in branches.iter().enumerate() {
                if other_k != k {
                    half_width = half_width.min(0.5 * (other.freq_mhz[bi] - center).abs());
                }
            }
            let (lo, hi) = (center - half_width, center + half_width);
            if lo < omega_lo || hi > omega_hi {
                return Err(TransmissionError::WindowOutsideGrid {
                    branch: k,
                    b_mt: b,
                    lo,
                    hi,
                });
            }
            let min_abs = map
                .omega_mhz
                .iter()
                .enumerate()
                .filter(|(_, &w)| w >= lo && w <= hi)
                .map(|(oi, _)| map.abs_at(bi, oi))
                .fold(f64::INFINITY, f64::min);
            if !min_abs.is_finite() {
                return Err(TransmissionError::WindowOutsideGrid {
                    branch: k,
                    b_mt: b,
                    lo,
                    hi,
                });
            }
            visibility[k].push(1.0 - min_abs);
        }
    }
    Ok(VisibilityProfile {
        b_mt: map.b_mt.clone(),
        visibility,
    })
}
