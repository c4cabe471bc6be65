//! Single-field analysis report: spectra, closed-form couplings and
//! gaps, dispersive quantities with validity indicators, and eigenstate
//! negativities against the spin-free baseline.

use polchip_core::*;
use serde::Serialize;

use crate::error::AppError;

#[derive(Serialize)]
pub struct Report {
    pub b_mt: f64,
    pub eigenvalues_mhz: Vec<f64>,
    pub eigenstates: Vec<EigenstateEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_modes: Option<NormalModes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polariton_angles_rad: Option<Vec<AngleEntry>>,
    /// Closed-form gap between the two upper polariton branches
    /// (two-spin pairs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_polariton_gap: Option<PolaritonGap>,
    /// Remote coupling of the spin to the empty partner (one-spin pairs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remote_coupling_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_gap_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_field: Option<CrossingField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispersive: Option<DispersiveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_spin: Option<SpinSpinCoupling>,
    /// Photon-photon negativity of each eigenstate at this field, with
    /// the spin-free value of the same sorted state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negativity: Option<Vec<NegativityEntry>>,
}

#[derive(Serialize)]
pub struct EigenstateEntry {
    pub index: usize,
    pub freq_mhz: f64,
    pub composition: Vec<polchip_core::spectrum::SlotWeight>,
}

#[derive(Serialize)]
pub struct AngleEntry {
    pub ler: usize,
    pub theta_rad: f64,
}

#[derive(Serialize)]
pub struct NegativityEntry {
    pub index: usize,
    pub negativity: f64,
    pub baseline: f64,
}

pub fn report(cfg: &ChipConfig, b_mt: f64) -> Result<Report, AppError> {
    if b_mt < 0.0 {
        return Err(AppError::Usage(format!(
            "field must be non-negative, got {b_mt} mT"
        )));
    }
    let basis = SingleExcitationBasis::for_config(cfg);
    let sol = eigensolve(&build_hamiltonian(cfg, b_mt), Some(&basis))?;
    let eigenstates = sol
        .eigenvectors
        .iter()
        .enumerate()
        .map(|(index, v)| EigenstateEntry {
            index,
            freq_mhz: sol.eigenvalues[index],
            composition: probabilities(v, &basis),
        })
        .collect();

    let n_spins = cfg.n_spins();
    let is_pair = cfg.n_lers() == 2;

    let nm = if is_pair {
        Some(normal_modes(cfg, (0, 1))?)
    } else {
        None
    };

    let angles = if n_spins > 0 {
        let mut entries = Vec::new();
        for (ler, spin) in cfg.spins.iter().enumerate() {
            if spin.is_some() {
                entries.push(AngleEntry {
                    ler,
                    theta_rad: polariton_angle(cfg, ler, b_mt)?,
                });
            }
        }
        Some(entries)
    } else {
        None
    };

    let gap = if is_pair && n_spins == 2 {
        Some(upper_polariton_gap(cfg, b_mt)?)
    } else {
        None
    };

    let (remote, predicted, crossing) = if is_pair && n_spins == 1 {
        let remote = remote_coupling_of_pair(cfg)?;
        (Some(remote), Some(2.0 * remote), Some(crossing_field(cfg)?))
    } else {
        (None, None, None)
    };

    let dispersive = if is_pair && n_spins > 0 {
        Some(dispersive_shifts(cfg, b_mt)?)
    } else {
        None
    };

    let spin_spin = if is_pair && n_spins == 2 {
        Some(effective_spin_spin_j(cfg, b_mt)?)
    } else {
        None
    };

    let negativity_entries = if cfg.n_lers() >= 2 {
        let mut baseline_cfg = cfg.clone();
        for spin in baseline_cfg.spins.iter_mut().flatten() {
            spin.coupling_mhz = 0.0;
        }
        let base_sol = eigensolve(&build_hamiltonian(&baseline_cfg, b_mt), Some(&basis))?;
        let mut entries = Vec::new();
        for (index, v) in sol.eigenvectors.iter().enumerate() {
            let rho = reduced_cavity_density_matrix(v, &basis, (0, 1));
            let base_rho =
                reduced_cavity_density_matrix(&base_sol.eigenvectors[index], &basis, (0, 1));
            entries.push(NegativityEntry {
                index,
                negativity: negativity(&rho)?,
                baseline: negativity(&base_rho)?,
            });
        }
        Some(entries)
    } else {
        None
    };

    Ok(Report {
        b_mt,
        eigenvalues_mhz: sol.eigenvalues,
        eigenstates,
        normal_modes: nm,
        polariton_angles_rad: angles,
        upper_polariton_gap: gap,
        remote_coupling_mhz: remote,
        predicted_gap_mhz: predicted,
        crossing_field: crossing,
        dispersive,
        spin_spin,
        negativity: negativity_entries,
    })
}
