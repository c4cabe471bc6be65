//! Unit conventions, physical constants, chip configuration records and
//! validation.
//!
//! All frequencies, couplings and loss rates are linear frequencies
//! (omega / 2 pi) in MHz. Magnetic field is in mT, temperature in mK.
//! Every expression in the model is homogeneous of degree one in frequency,
//! so the 2 pi factor cancels throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bohr magneton over Planck constant, MHz per mT (CODATA).
pub const MU_B_OVER_H_MHZ_PER_MT: f64 = 13.996_244_9;

/// Boltzmann constant over Planck constant, MHz per mK (CODATA).
pub const KB_OVER_H_MHZ_PER_MK: f64 = 20.836_619;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: missing required field")]
    MissingField { path: String },
    #[error("{path}: {message}")]
    InvalidValue { path: String, message: String },
    #[error("duplicate LER label {label:?}")]
    DuplicateLabel { label: String },
    #[error("couplings[{entry}]: LER index {index} out of range (chip has {n_lers} LERs, indices are 1-based)")]
    DanglingCouplingIndex {
        entry: usize,
        index: usize,
        n_lers: usize,
    },
    #[error("couplings[{entry}]: self-coupling ({index}, {index}) is not allowed")]
    SelfCoupling { entry: usize, index: usize },
    #[error("spins: no LER labelled {label:?}")]
    UnknownSpinLabel { label: String },
    #[error("negative magnetic field {b_mt} mT (sweeps are specified in |B|)")]
    NegativeField { b_mt: f64 },
}

/// Parameters of one lumped-element resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerParams {
    pub label: String,
    /// Bare resonance frequency, MHz.
    pub omega_r_mhz: f64,
    /// Total photon loss half-width, MHz.
    pub kappa_mhz: f64,
    /// Feedline coupling rate, MHz.
    pub kappa_c_mhz: f64,
}

/// Collective parameters of a spin ensemble hosted on one LER.
///
/// Only the collective coupling enters any computation; the microscopic
/// spin count never does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsembleParams {
    /// Lande g factor.
    pub g: f64,
    /// Collective spin-photon coupling at full polarization, MHz.
    pub coupling_mhz: f64,
    /// Spin linewidth half-width, MHz.
    pub gamma_mhz: f64,
    /// Magnitude of the direct spin-feedline coupling, MHz.
    pub gamma_c_mhz: f64,
    /// Phase of the spin-feedline coupling, radians.
    pub gamma_c_phase_rad: f64,
}

/// One entry of the inter-resonator coupling map. Indices are 1-based
/// positions in the `lers` list, matching the paper's LER numbering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub kappa_mhz: f64,
}

/// Raw configuration document, as parsed from JSON. See
/// [`validate_config`] for the normalized form.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RawChipConfig {
    pub lers: Vec<RawLer>,
    #[serde(default)]
    pub spins: BTreeMap<String, RawSpin>,
    #[serde(default)]
    pub couplings: Vec<RawCoupling>,
    #[serde(default, rename = "temperature_mK", alias = "temperature_mk")]
    pub temperature_mk: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawLer {
    pub label: Option<String>,
    #[serde(rename = "omega_r_MHz", alias = "omega_r_mhz")]
    pub omega_r_mhz: Option<f64>,
    #[serde(rename = "kappa_MHz", alias = "kappa_mhz")]
    pub kappa_mhz: Option<f64>,
    #[serde(rename = "kappa_c_MHz", alias = "kappa_c_mhz")]
    pub kappa_c_mhz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawSpin {
    pub g: Option<f64>,
    #[serde(rename = "G_MHz", alias = "g_mhz")]
    pub coupling_mhz: Option<f64>,
    #[serde(rename = "gamma_MHz", alias = "gamma_mhz")]
    pub gamma_mhz: Option<f64>,
    #[serde(default, rename = "gamma_c_MHz", alias = "gamma_c_mhz")]
    pub gamma_c_mhz: Option<f64>,
    #[serde(default)]
    pub gamma_c_phase_rad: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawCoupling {
    pub i: Option<usize>,
    pub j: Option<usize>,
    #[serde(rename = "kappa_MHz", alias = "kappa_mhz")]
    pub kappa_mhz: Option<f64>,
}

/// Validated, normalized chip description. Immutable after validation;
/// all downstream operations are pure functions over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipConfig {
    pub lers: Vec<LerParams>,
    /// One optional spin ensemble per LER, in LER order.
    pub spins: Vec<Option<SpinEnsembleParams>>,
    /// Symmetric coupling map stored with i < j, 1-based indices.
    pub couplings: Vec<CouplingEntry>,
    /// Sample temperature in mK; 0 means full polarization.
    pub temperature_mk: f64,
    /// Non-fatal validation findings (e.g. kappa_c > kappa).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ChipConfig {
    pub fn n_lers(&self) -> usize {
        self.lers.len()
    }

    pub fn n_spins(&self) -> usize {
        self.spins.iter().filter(|s| s.is_some()).count()
    }

    /// Coupling kappa_ij between LERs at 0-based positions `i` and `j`.
    pub fn coupling_between(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i + 1, j + 1) } else { (j + 1, i + 1) };
        self.couplings
            .iter()
            .find(|c| c.i == a && c.j == b)
            .map_or(0.0, |c| c.kappa_mhz)
    }

    /// Convert back to the raw document form (used to check idempotence
    /// and to echo normalized configs).
    pub fn to_raw(&self) -> RawChipConfig {
        RawChipConfig {
            lers: self
                .lers
                .iter()
                .map(|l| RawLer {
                    label: Some(l.label.clone()),
                    omega_r_mhz: Some(l.omega_r_mhz),
                    kappa_mhz: Some(l.kappa_mhz),
                    kappa_c_mhz: Some(l.kappa_c_mhz),
                })
                .collect(),
            spins: self
                .lers
                .iter()
                .zip(&self.spins)
                .filter_map(|(l, s)| {
                    s.as_ref().map(|s| {
                        (
                            l.label.clone(),
                            RawSpin {
                                g: Some(s.g),
                                coupling_mhz: Some(s.coupling_mhz),
                                gamma_mhz: Some(s.gamma_mhz),
                                gamma_c_mhz: Some(s.gamma_c_mhz),
                                gamma_c_phase_rad: Some(s.gamma_c_phase_rad),
                            },
                        )
                    })
                })
                .collect(),
            couplings: self
                .couplings
                .iter()
                .map(|c| RawCoupling {
                    i: Some(c.i),
                    j: Some(c.j),
                    kappa_mhz: Some(c.kappa_mhz),
                })
                .collect(),
            temperature_mk: Some(self.temperature_mk),
        }
    }
}

/// Spin resonance frequency Omega_S = g mu_B B, in MHz.
///
/// Field sweeps are specified in |B|; a negative field is rejected.
pub fn spin_frequency(g: f64, b_mt: f64) -> Result<f64, ConfigError> {
    if b_mt < 0.0 {
        return Err(ConfigError::NegativeField { b_mt });
    }
    Ok(g * MU_B_OVER_H_MHZ_PER_MT * b_mt)
}

pub(crate) fn spin_frequency_raw(g: f64, b_mt: f64) -> f64 {
    g * MU_B_OVER_H_MHZ_PER_MT * b_mt
}

/// Thermal depolarization of the collective coupling,
/// G(T) = G(0) sqrt(tanh(g mu_B B S / k_B T)) with S = 1/2.
///
/// T <= 0 is treated as the zero-temperature identity limit.
pub fn thermal_coupling(g0_mhz: f64, g: f64, b_mt: f64, t_mk: f64) -> f64 {
    if t_mk <= 0.0 {
        return g0_mhz;
    }
    let arg = g * MU_B_OVER_H_MHZ_PER_MT * b_mt * 0.5 / (KB_OVER_H_MHZ_PER_MK * t_mk);
    g0_mhz * arg.tanh().sqrt()
}

fn require<T: Copy>(value: Option<T>, path: String) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::MissingField { path })
}

fn positive(value: f64, path: &str) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::InvalidValue {
            path: path.to_string(),
            message: format!("must be positive and finite, got {value}"),
        })
    }
}

fn non_negative(value: f64, path: &str) -> Result<f64, ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::InvalidValue {
            path: path.to_string(),
            message: format!("must be non-negative and finite, got {value}"),
        })
    }
}

/// Validate and normalize a raw configuration document.
///
/// Defaults applied: temperature 0 mK, gamma_c 0. The coupling map is
/// symmetrized (an entry (i, j) also defines kappa_ji) and stored with
/// i < j. Validation is idempotent: re-validating `cfg.to_raw()` returns
/// an identical config.
pub fn validate_config(raw: &RawChipConfig) -> Result<ChipConfig, ConfigError> {
    if raw.lers.is_empty() {
        return Err(ConfigError::InvalidValue {
            path: "lers".into(),
            message: "no resonators".into(),
        });
    }
    let mut warnings = Vec::new();
    let mut lers = Vec::with_capacity(raw.lers.len());
    for (idx, l) in raw.lers.iter().enumerate() {
        let path = |f: &str| format!("lers[{idx}].{f}");
        let label = l
            .label
            .clone()
            .ok_or_else(|| ConfigError::MissingField { path: path("label") })?;
        let omega_r = positive(require(l.omega_r_mhz, path("omega_r_mhz"))?, &path("omega_r_mhz"))?;
        let kappa = positive(require(l.kappa_mhz, path("kappa_mhz"))?, &path("kappa_mhz"))?;
        let kappa_c = non_negative(require(l.kappa_c_mhz, path("kappa_c_mhz"))?, &path("kappa_c_mhz"))?;
        if kappa_c > kappa {
            warnings.push(format!(
                "lers[{idx}] ({label}): kappa_c = {kappa_c} MHz exceeds kappa = {kappa} MHz"
            ));
        }
        if lers.iter().any(|p: &LerParams| p.label == label) {
            return Err(ConfigError::DuplicateLabel { label });
        }
        lers.push(LerParams {
            label,
            omega_r_mhz: omega_r,
            kappa_mhz: kappa,
            kappa_c_mhz: kappa_c,
        });
    }

    let mut spins: Vec<Option<SpinEnsembleParams>> = vec![None; lers.len()];
    for (label, s) in &raw.spins {
        let Some(pos) = lers.iter().position(|l| &l.label == label) else {
            return Err(ConfigError::UnknownSpinLabel {
                label: label.clone(),
            });
        };
        let path = |f: &str| format!("spins.{label}.{f}");
        let g = positive(require(s.g, path("g"))?, &path("g"))?;
        let coupling = non_negative(require(s.coupling_mhz, path("g_mhz"))?, &path("g_mhz"))?;
        let gamma = positive(require(s.gamma_mhz, path("gamma_mhz"))?, &path("gamma_mhz"))?;
        let gamma_c = non_negative(s.gamma_c_mhz.unwrap_or(0.0), &path("gamma_c_mhz"))?;
        let phase = s.gamma_c_phase_rad.unwrap_or(0.0);
        if !phase.is_finite() {
            return Err(ConfigError::InvalidValue {
                path: path("gamma_c_phase_rad"),
                message: "must be finite".into(),
            });
        }
        spins[pos] = Some(SpinEnsembleParams {
            g,
            coupling_mhz: coupling,
            gamma_mhz: gamma,
            gamma_c_mhz: gamma_c,
            gamma_c_phase_rad: phase,
        });
    }

    let mut couplings: Vec<CouplingEntry> = Vec::new();
    for (entry, c) in raw.couplings.iter().enumerate() {
        let i = require(c.i, format!("couplings[{entry}].i"))?;
        let j = require(c.j, format!("couplings[{entry}].j"))?;
        let kappa = non_negative(
            require(c.kappa_mhz, format!("couplings[{entry}].kappa_mhz"))?,
            &format!("couplings[{entry}].kappa_mhz"),
        )?;
        for index in [i, j] {
            if index == 0 || index > lers.len() {
                return Err(ConfigError::DanglingCouplingIndex {
                    entry,
                    index,
                    n_lers: lers.len(),
                });
            }
        }
        if i == j {
            return Err(ConfigError::SelfCoupling { entry, index: i });
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if let Some(existing) = couplings.iter_mut().find(|e| e.i == a && e.j == b) {
            if existing.kappa_mhz != kappa {
                return Err(ConfigError::InvalidValue {
                    path: format!("couplings[{entry}]"),
                    message: format!(
                        "conflicting values for ({a}, {b}): {} vs {kappa}",
                        existing.kappa_mhz
                    ),
                });
            }
        } else {
            couplings.push(CouplingEntry {
                i: a,
                j: b,
                kappa_mhz: kappa,
            });
        }
    }
    couplings.sort_by_key(|c| (c.i, c.j));

    let temperature = raw.temperature_mk.unwrap_or(0.0);
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(ConfigError::InvalidValue {
            path: "temperature_mk".into(),
            message: format!("must be non-negative and finite, got {temperature}"),
        });
    }

    Ok(ChipConfig {
        lers,
        spins,
        couplings,
        temperature_mk: temperature,
        warnings,
    })
}

/// Parse and validate a JSON configuration document.
pub fn config_from_json(text: &str) -> Result<ChipConfig, ConfigError> {
    let raw: RawChipConfig = serde_json::from_str(text).map_err(|e| ConfigError::InvalidValue {
        path: "<document>".into(),
        message: e.to_string(),
    })?;
    validate_config(&raw)
}
