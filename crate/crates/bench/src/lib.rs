//! Shared chip configurations for the benchmark suite.

use polchip_core::{ChipConfig, CouplingEntry, LerParams, SpinEnsembleParams};

/// The coupled two-spin pair used throughout the benchmarks.
pub fn two_spin_pair() -> ChipConfig {
    ChipConfig {
        lers: vec![
            LerParams {
                label: "LER1".into(),
                omega_r_mhz: 1702.9,
                kappa_mhz: 0.091,
                kappa_c_mhz: 0.0185,
            },
            LerParams {
                label: "LER2".into(),
                omega_r_mhz: 1709.6,
                kappa_mhz: 0.103,
                kappa_c_mhz: 0.007,
            },
        ],
        spins: vec![
            Some(SpinEnsembleParams {
                g: 2.001,
                coupling_mhz: 19.5,
                gamma_mhz: 0.5,
                gamma_c_mhz: 0.0,
                gamma_c_phase_rad: 0.0,
            }),
            Some(SpinEnsembleParams {
                g: 2.003,
                coupling_mhz: 8.5,
                gamma_mhz: 0.5,
                gamma_c_mhz: 0.0,
                gamma_c_phase_rad: 0.0,
            }),
        ],
        couplings: vec![CouplingEntry {
            i: 1,
            j: 2,
            kappa_mhz: 1.06,
        }],
        temperature_mk: 0.0,
        warnings: Vec::new(),
    }
}

/// A chain of `n` coupled one-spin modules, for scaling benchmarks.
pub fn chain(n: usize) -> ChipConfig {
    let lers = (0..n)
        .map(|k| LerParams {
            label: format!("LER{}", k + 1),
            omega_r_mhz: 2000.0 + 25.0 * k as f64,
            kappa_mhz: 0.1,
            kappa_c_mhz: 0.02,
        })
        .collect();
    let spins = (0..n)
        .map(|_| {
            Some(SpinEnsembleParams {
                g: 2.0,
                coupling_mhz: 5.0,
                gamma_mhz: 2.0,
                gamma_c_mhz: 0.0,
                gamma_c_phase_rad: 0.0,
            })
        })
        .collect();
    let couplings = (1..n)
        .map(|k| CouplingEntry {
            i: k,
            j: k + 1,
            kappa_mhz: 2.0,
        })
        .collect();
    ChipConfig {
        lers,
        spins,
        couplings,
        temperature_mk: 0.0,
        warnings: Vec::new(),
    }
}
