//! Closed-form expressions for remote couplings, gaps, crossing fields
//! and dispersive (Schrieffer-Wolff) quantities, for fast parameter
//! estimation and for cross-validation against exact diagonalization.
//!
//! Validity indicators (dispersive ratios, crossing-field condition) are
//! returned alongside values rather than raised as errors: the formulas
//! are routinely used near the edge of their validity.

use serde::Serialize;
use thiserror::Error;

use crate::config::{ChipConfig, MU_B_OVER_H_MHZ_PER_MT};
use crate::spectrum::{normal_modes, FieldPoint, NormalModes, SpectrumError};

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("degenerate input: delta_omega_r and kappa_12 cannot both be zero")]
    DegenerateRemoteCoupling,
    #[error("chip must contain exactly two LERs, found {n}")]
    NotAPair { n: usize },
    #[error("expected exactly one spin ensemble, found {n}")]
    NotOneSpin { n: usize },
    #[error("no spin ensembles configured")]
    NoSpins,
    #[error("normal modes are degenerate (omega_+ = omega_-)")]
    DegenerateModes,
    #[error("spin {ler} is resonant with normal mode {mode}: dispersive expansion invalid")]
    DispersiveResonance { ler: usize, mode: char },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Inputs of the remote-coupling expression.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RemoteCouplingInputs {
    /// Local collective coupling of the spin to its host LER, MHz.
    pub g_local_mhz: f64,
    /// Signed detuning of the spin-hosting LER above the empty one,
    /// omega_r(host) - omega_r(empty), MHz. Positive detuning suppresses
    /// the remote coupling; the magnitude matches the absolute-value form
    /// used for the measured pair.
    pub delta_omega_r_mhz: f64,
    /// Inter-resonator coupling, MHz.
    pub kappa_12_mhz: f64,
}

/// Remote coupling of a spin ensemble to the empty partner LER,
/// G_remote = (G / sqrt 2) sqrt(1 - d / sqrt(d^2 + 4 kappa^2)).
///
/// Equals the magnitude of the spin's coupling to the partner-dominant
/// normal mode; -> G / sqrt 2 for kappa >> |d| (fully delocalized normal
/// modes), -> 0 for kappa -> 0 with d > 0.
pub fn remote_coupling(inputs: RemoteCouplingInputs) -> Result<f64, ClosedFormError> {
    let d = inputs.delta_omega_r_mhz;
    let k = inputs.kappa_12_mhz;
    if d == 0.0 && k == 0.0 {
        return Err(ClosedFormError::DegenerateRemoteCoupling);
    }
    let root = d.hypot(2.0 * k);
    Ok(inputs.g_local_mhz / 2.0_f64.sqrt() * (1.0 - d / root).sqrt())
}

/// Predicted minimum gap between the two lowest branches of a one-spin
/// pair, 2 G_remote.
pub fn predicted_gap_one_spin(inputs: RemoteCouplingInputs) -> Result<f64, ClosedFormError> {
    Ok(2.0 * remote_coupling(inputs)?)
}

/// Polariton-polariton gap and coupling from the hybridization angles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolaritonGap {
    /// Full gap 2 J = 2 kappa_12 cos(theta_1/2) cos(theta_2/2), MHz.
    pub gap_mhz: f64,
    /// Effective polariton-polariton coupling J (half the gap), MHz.
    pub j_mhz: f64,
}

/// Gap between two polariton branches coupled through kappa_12, given
/// the angles whose half-cosines are the photon amplitudes of the two
/// branches: maximal (2 kappa) for pure photon modes (theta = 0), zero
/// for pure spin modes (theta = pi).
pub fn polariton_gap(kappa_12_mhz: f64, theta_1: f64, theta_2: f64) -> PolaritonGap {
    let j = kappa_12_mhz * (0.5 * theta_1).cos() * (0.5 * theta_2).cos();
    PolaritonGap {
        gap_mhz: 2.0 * j,
        j_mhz: j,
    }
}

/// Gap between the two *upper* polariton branches of a two-spin pair at
/// field `b_mt`.
///
/// In the theta = atan2(2G, Omega_S - omega_r) convention the upper
/// branch's photon amplitude is sin(theta/2) = cos((pi - theta)/2), so
/// the gap formula is evaluated at the complementary angles.
pub fn upper_polariton_gap(config: &ChipConfig, b_mt: f64) -> Result<PolaritonGap, ClosedFormError> {
    if config.n_lers() != 2 {
        return Err(ClosedFormError::NotAPair { n: config.n_lers() });
    }
    let theta_1 = crate::spectrum::polariton_angle(config, 0, b_mt)?;
    let theta_2 = crate::spectrum::polariton_angle(config, 1, b_mt)?;
    let kappa = config.coupling_between(0, 1);
    Ok(polariton_gap(
        kappa,
        std::f64::consts::PI - theta_1,
        std::f64::consts::PI - theta_2,
    ))
}

/// Perturbative branch energies of the (spin, b_+) block,
/// (1/2)(Omega + omega_+ +- sqrt((Omega - omega_+)^2 + 4 G~^2)),
/// returned as (upper, lower).
pub fn pseudo_eigenenergies(omega_s_mhz: f64, omega_plus_mhz: f64, gtilde_plus_mhz: f64) -> (f64, f64) {
    let mean = 0.5 * (omega_s_mhz + omega_plus_mhz);
    let root = 0.5 * (omega_s_mhz - omega_plus_mhz).hypot(2.0 * gtilde_plus_mhz);
    (mean + root, mean - root)
}

/// Predicted anticrossing field for a pair hosting a single spin
/// ensemble.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingField {
    pub b_mt: f64,
    /// Predicted spin frequency at the crossing, MHz.
    pub omega_s_mhz: f64,
    /// G~_+ / |Omega_S - omega_+|; the prediction assumes this is small.
    pub validity_ratio: f64,
    pub valid: bool,
}

/// Field at which the spin's lower polariton branch meets the far normal
/// mode: Omega_S = omega_- + G~_+^2 / (omega_+ - omega_-), solved for B.
///
/// The dispersive repulsion from the near mode shifts the crossing above
/// the bare spin resonance with omega_-; the shift shrinks as kappa_12
/// or the pair detuning grows.
pub fn crossing_field(config: &ChipConfig) -> Result<CrossingField, ClosedFormError> {
    if config.n_lers() != 2 {
        return Err(ClosedFormError::NotAPair { n: config.n_lers() });
    }
    let hosts: Vec<usize> = (0..2).filter(|&j| config.spins[j].is_some()).collect();
    if hosts.len() != 1 {
        return Err(ClosedFormError::NotOneSpin { n: hosts.len() });
    }
    let host = hosts[0];
    let nm = normal_modes(config, (0, 1))?;
    let split = nm.splitting_mhz();
    if split == 0.0 {
        return Err(ClosedFormError::DegenerateModes);
    }
    let gtilde_plus = nm.coupling_for(host).expect("host has couplings").g_plus_mhz;
    let omega_s = nm.omega_minus_mhz + gtilde_plus * gtilde_plus / split;
    let g_factor = config.spins[host].as_ref().expect("host spin").g;
    let b_mt = omega_s / (g_factor * MU_B_OVER_H_MHZ_PER_MT);
    let detuning_plus = (omega_s - nm.omega_plus_mhz).abs();
    let validity_ratio = if detuning_plus > 0.0 {
        gtilde_plus.abs() / detuning_plus
    } else {
        f64::INFINITY
    };
    Ok(CrossingField {
        b_mt,
        omega_s_mhz: omega_s,
        validity_ratio,
        valid: validity_ratio < 1.0,
    })
}

/// One dispersive shift chi = G~^2 / Delta~ with its detuning.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersiveShift {
    pub ler: usize,
    /// '+' or '-' normal mode.
    pub mode: char,
    pub chi_mhz: f64,
    /// Delta~ = Omega_S - omega_mode, MHz.
    pub detuning_mhz: f64,
    /// |G~| / |Delta~|.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersiveReport {
    pub shifts: Vec<DispersiveShift>,
    /// Largest |G~| / |Delta~| over all (spin, mode) pairs.
    pub max_ratio: f64,
    /// All ratios at or below 0.1 (the usual dispersive criterion).
    pub valid: bool,
}

/// Per hosted spin: (LER position, Omega_S, [G~+, G~-], [Delta~+, Delta~-]).
type SpinModeRow = (usize, f64, [f64; 2], [f64; 2]);

fn mode_table(
    config: &ChipConfig,
    b_mt: f64,
) -> Result<(NormalModes, Vec<SpinModeRow>), ClosedFormError> {
    if config.n_lers() != 2 {
        return Err(ClosedFormError::NotAPair { n: config.n_lers() });
    }
    let nm = normal_modes(config, (0, 1))?;
    let point = FieldPoint::of(config, b_mt);
    let mut rows = Vec::new();
    for (ler, spin) in point.spins.iter().enumerate() {
        let Some(&(omega_s, g_eff)) = spin.as_ref() else {
            continue;
        };
        let c = nm.coupling_for(ler).expect("spin has normal-mode couplings");
        // thermal depolarization rescales both couplings uniformly
        let scale = if config.spins[ler].as_ref().expect("spin").coupling_mhz > 0.0 {
            g_eff / config.spins[ler].as_ref().expect("spin").coupling_mhz
        } else {
            0.0
        };
        let gt = [c.g_plus_mhz * scale, c.g_minus_mhz * scale];
        let dt = [omega_s - nm.omega_plus_mhz, omega_s - nm.omega_minus_mhz];
        rows.push((ler, omega_s, gt, dt));
    }
    Ok((nm, rows))
}

/// Dispersive shifts chi_{j,mu} = G~_{j,mu}^2 / Delta~_{j,mu} of every
/// hosted spin against both normal modes, signed (negative for a spin
/// below the mode).
pub fn dispersive_shifts(config: &ChipConfig, b_mt: f64) -> Result<DispersiveReport, ClosedFormError> {
    let (_, rows) = mode_table(config, b_mt)?;
    if rows.is_empty() {
        return Err(ClosedFormError::NoSpins);
    }
    let mut shifts = Vec::new();
    let mut max_ratio = 0.0f64;
    for (ler, _, gt, dt) in rows {
        for (m, mode) in ['+', '-'].into_iter().enumerate() {
            if dt[m] == 0.0 {
                return Err(ClosedFormError::DispersiveResonance { ler, mode });
            }
            let ratio = gt[m].abs() / dt[m].abs();
            max_ratio = max_ratio.max(ratio);
            shifts.push(DispersiveShift {
                ler,
                mode,
                chi_mhz: gt[m] * gt[m] / dt[m],
                detuning_mhz: dt[m],
                ratio,
            });
        }
    }
    Ok(DispersiveReport {
        shifts,
        max_ratio,
        valid: max_ratio <= 0.1,
    })
}

/// Circuit-mediated effective spin-spin coupling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpinSpinCoupling {
    /// J = sum_mu G~_{1,mu} G~_{2,mu} (1/Delta~_{1,mu} + 1/Delta~_{2,mu}),
    /// MHz; the effective term is (J/2)(S1+ S2- + S1- S2+).
    pub j_mhz: f64,
    pub max_ratio: f64,
    pub valid: bool,
}

pub fn effective_spin_spin_j(config: &ChipConfig, b_mt: f64) -> Result<SpinSpinCoupling, ClosedFormError> {
    let (_, rows) = mode_table(config, b_mt)?;
    if rows.len() != 2 {
        return Err(ClosedFormError::NotOneSpin { n: rows.len() });
    }
    let (_, _, gt1, dt1) = rows[0];
    let (_, _, gt2, dt2) = rows[1];
    let mut j = 0.0;
    let mut max_ratio = 0.0f64;
    for m in 0..2 {
        for (ler, gt, dt) in [(0usize, gt1[m], dt1[m]), (1, gt2[m], dt2[m])] {
            if dt == 0.0 {
                return Err(ClosedFormError::DispersiveResonance {
                    ler,
                    mode: if m == 0 { '+' } else { '-' },
                });
            }
            max_ratio = max_ratio.max(gt.abs() / dt.abs());
        }
        j += gt1[m] * gt2[m] * (1.0 / dt1[m] + 1.0 / dt2[m]);
    }
    Ok(SpinSpinCoupling {
        j_mhz: j,
        max_ratio,
        valid: max_ratio <= 0.1,
    })
}

/// Spin-like excitation energies of the second-order effective
/// Hamiltonian: eigenvalues of
/// [[Omega_1 + sum_mu chi_1mu, J/2], [J/2, Omega_2 + sum_mu chi_2mu]],
/// returned ascending.
pub fn dispersive_spin_levels(config: &ChipConfig, b_mt: f64) -> Result<(f64, f64), ClosedFormError> {
    let (_, rows) = mode_table(config, b_mt)?;
    if rows.len() != 2 {
        return Err(ClosedFormError::NotOneSpin { n: rows.len() });
    }
    let j = effective_spin_spin_j(config, b_mt)?.j_mhz;
    let mut e = [0.0f64; 2];
    for (idx, (ler, omega_s, gt, dt)) in rows.iter().enumerate() {
        let _ = ler;
        e[idx] = omega_s + gt[0] * gt[0] / dt[0] + gt[1] * gt[1] / dt[1];
    }
    let mean = 0.5 * (e[0] + e[1]);
    let root = 0.5 * (e[0] - e[1]).hypot(j);
    Ok((mean - root, mean + root))
}

/// Remote coupling of a one-spin pair derived from its configuration:
/// convenience wrapper feeding [`remote_coupling`] with the host-minus-
/// empty detuning and the pair's kappa_12.
pub fn remote_coupling_of_pair(config: &ChipConfig) -> Result<f64, ClosedFormError> {
    if config.n_lers() != 2 {
        return Err(ClosedFormError::NotAPair { n: config.n_lers() });
    }
    let hosts: Vec<usize> = (0..2).filter(|&j| config.spins[j].is_some()).collect();
    if hosts.len() != 1 {
        return Err(ClosedFormError::NotOneSpin { n: hosts.len() });
    }
    let host = hosts[0];
    let empty = 1 - host;
    remote_coupling(RemoteCouplingInputs {
        g_local_mhz: config.spins[host].as_ref().expect("host").coupling_mhz,
        delta_omega_r_mhz: config.lers[host].omega_r_mhz - config.lers[empty].omega_r_mhz,
        kappa_12_mhz: config.coupling_between(0, 1),
    })
}

/// Bare-spin resonance field with the far normal mode, Omega_S = omega_-.
pub fn bare_spin_resonance_field(config: &ChipConfig) -> Result<f64, ClosedFormError> {
    if config.n_lers() != 2 {
        return Err(ClosedFormError::NotAPair { n: config.n_lers() });
    }
    let hosts: Vec<usize> = (0..2).filter(|&j| config.spins[j].is_some()).collect();
    if hosts.len() != 1 {
        return Err(ClosedFormError::NotOneSpin { n: hosts.len() });
    }
    let nm = normal_modes(config, (0, 1))?;
    let g_factor = config.spins[hosts[0]].as_ref().expect("host").g;
    Ok(nm.omega_minus_mhz / (g_factor * MU_B_OVER_H_MHZ_PER_MT))
}

#[cfg(test)]
fn spin_freq_for(config: &ChipConfig, ler: usize, b_mt: f64) -> f64 {
    crate::config::spin_frequency_raw(config.spins[ler].as_ref().expect("spin").g, b_mt)
}
