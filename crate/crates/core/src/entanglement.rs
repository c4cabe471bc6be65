//! Photon-photon entanglement of chip eigenstates: reduced two-cavity
//! density matrices and their negativity, plus field sweeps against a
//! spin-free baseline.

use nalgebra::{DVector, Matrix4};
use num_complex::Complex64;
use thiserror::Error;

use crate::config::ChipConfig;
use crate::spectrum::{track_branches, FieldSweep, SingleExcitationBasis, SpectrumError};

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("density matrix trace is {trace}, expected 1 within 1e-9")]
    BadTrace { trace: f64 },
    #[error("density matrix is not Hermitian (max deviation {max_dev:e})")]
    NotHermitian { max_dev: f64 },
    #[error("chip has fewer than two LERs")]
    NotEnoughCavities,
    #[error("branch index {index} out of range ({n_branches} branches)")]
    BadBranch { index: usize, n_branches: usize },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Reduced state of two cavity modes in the occupation basis
/// (|00>, |01>, |10>, |11>), with |n1 n2> ordered by the first then the
/// second selected cavity.
#[derive(Debug, Clone)]
pub struct TwoModeDensityMatrix {
    pub rho: Matrix4<Complex64>,
}

impl TwoModeDensityMatrix {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Hermiticity, unit trace and positivity (to -1e-10 eigenvalue
    /// tolerance) checks.
    pub fn validate(&self) -> Result<(), EntanglementError> {
        let max_dev = (self.rho - self.rho.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if max_dev > 1e-10 {
            return Err(EntanglementError::NotHermitian { max_dev });
        }
        let trace = self.trace();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-12 {
            return Err(EntanglementError::BadTrace { trace: trace.re });
        }
        Ok(())
    }
}

/// Embed a single-excitation eigenvector into the product space of the
/// two selected cavities and everything else, then trace out all spin
/// slots (and any other cavities).
///
/// Writing |psi> = sum_k a_k |slot_k excited>, the photon amplitudes of
/// the selected pair populate |10> and |01>, every other slot's weight
/// lands on |00> (their excited states are mutually orthogonal, so no
/// coherence with the photon sector survives the trace), and |11> is
/// unreachable with a single excitation.
pub fn reduced_cavity_density_matrix(
    vector: &DVector<f64>,
    basis: &SingleExcitationBasis,
    cavity_pair: (usize, usize),
) -> TwoModeDensityMatrix {
    let b1 = vector[basis.photon_slot(cavity_pair.0)];
    let b2 = vector[basis.photon_slot(cavity_pair.1)];
    let p00 = (vector.norm_squared() - b1 * b1 - b2 * b2).max(0.0);
    let mut rho = Matrix4::zeros();
    let c = |x: f64| Complex64::new(x, 0.0);
    // basis order (|00>, |01>, |10>, |11>)
    rho[(0, 0)] = c(p00);
    rho[(1, 1)] = c(b2 * b2);
    rho[(2, 2)] = c(b1 * b1);
    rho[(1, 2)] = c(b2 * b1);
    rho[(2, 1)] = c(b1 * b2);
    TwoModeDensityMatrix { rho }
}

/// Negativity N = |sum of negative eigenvalues| of the partial transpose
/// over the first cavity.
pub fn negativity(rho: &TwoModeDensityMatrix) -> Result<f64, EntanglementError> {
    rho.validate()?;
    let pt = partial_transpose_first(&rho.rho);
    let eig = pt.symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|l| **l < 0.0)
        .map(|l| -l)
        .sum())
}

/// Partial transpose over the first cavity index:
/// rho^Gamma_{(m1 m2),(n1 n2)} = rho_{(n1 m2),(m1 n2)}.
pub fn partial_transpose_first(rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let idx = |n1: usize, n2: usize| 2 * n1 + n2;
    let mut pt = Matrix4::zeros();
    for m1 in 0..2 {
        for m2 in 0..2 {
            for n1 in 0..2 {
                for n2 in 0..2 {
                    pt[(idx(m1, m2), idx(n1, n2))] = rho[(idx(n1, m2), idx(m1, n2))];
                }
            }
        }
    }
    pt
}

/// Partial transpose over the second cavity (equal negativity; used by
/// the invariance tests).
pub fn partial_transpose_second(rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let idx = |n1: usize, n2: usize| 2 * n1 + n2;
    let mut pt = Matrix4::zeros();
    for m1 in 0..2 {
        for m2 in 0..2 {
            for n1 in 0..2 {
                for n2 in 0..2 {
                    pt[(idx(m1, m2), idx(n1, n2))] = rho[(idx(m1, n2), idx(n1, m2))];
                }
            }
        }
    }
    pt
}

/// Negativity curves of selected tracked branches over a field sweep,
/// together with the spin-free baseline (same chip with every G set to
/// zero, tracked over the same sweep).
#[derive(Debug, Clone)]
pub struct NegativitySweep {
    pub b_mt: Vec<f64>,
    /// (branch index, negativity per B point)
    pub curves: Vec<(usize, Vec<f64>)>,
    /// (branch index, spin-free negativity per B point)
    pub baselines: Vec<(usize, Vec<f64>)>,
}

impl NegativitySweep {
    /// CSV columns (B_mT, branch_index, negativity, baseline_negativity).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "B_mT,branch_index,negativity,baseline_negativity")?;
        for ((k, curve), (_, base)) in self.curves.iter().zip(&self.baselines) {
            for ((b, n), nb) in self.b_mt.iter().zip(curve).zip(base) {
                writeln!(
                    w,
                    "{},{},{},{}",
                    crate::transmission::fmt_sig(*b),
                    k,
                    crate::transmission::fmt_sig(*n),
                    crate::transmission::fmt_sig(*nb)
                )?;
            }
        }
        Ok(())
    }
}

fn spin_free(config: &ChipConfig) -> ChipConfig {
    let mut cfg = config.clone();
    for spin in cfg.spins.iter_mut().flatten() {
        spin.coupling_mhz = 0.0;
    }
    cfg
}

/// Photon-photon negativity of the selected branches across the sweep,
/// for the cavity pair (0, 1).
pub fn negativity_sweep(
    config: &ChipConfig,
    sweep: &FieldSweep,
    branch_selection: &[usize],
) -> Result<NegativitySweep, EntanglementError> {
    if config.n_lers() < 2 {
        return Err(EntanglementError::NotEnoughCavities);
    }
    let basis = SingleExcitationBasis::for_config(config);
    let branches = track_branches(config, sweep)?;
    let baseline_cfg = spin_free(config);
    let baseline_branches = track_branches(&baseline_cfg, sweep)?;
    let mut curves = Vec::new();
    let mut baselines = Vec::new();
    for &k in branch_selection {
        if k >= branches.len() {
            return Err(EntanglementError::BadBranch {
                index: k,
                n_branches: branches.len(),
            });
        }
        let curve = branches[k]
            .vectors
            .iter()
            .map(|v| negativity(&reduced_cavity_density_matrix(v, &basis, (0, 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let base = baseline_branches[k]
            .vectors
            .iter()
            .map(|v| negativity(&reduced_cavity_density_matrix(v, &basis, (0, 1))))
            .collect::<Result<Vec<_>, _>>()?;
        curves.push((k, curve));
        baselines.push((k, base));
    }
    Ok(NegativitySweep {
        b_mt: sweep.values().to_vec(),
        curves,
        baselines,
    })
}
