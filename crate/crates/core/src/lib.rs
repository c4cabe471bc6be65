//! Models of capacitively coupled superconducting lumped-element
//! resonator (LER) chains hosting collective spin ensembles: exact
//! single-excitation spectra, closed-form couplings and gaps, feedline
//! transmission from input-output theory, photon-photon entanglement,
//! and least-squares parameter extraction.
//!
//! All frequencies are linear (omega / 2 pi) in MHz, fields in mT,
//! temperatures in mK. Configurations are immutable after validation and
//! every operation is a pure function, so everything can be shared
//! freely across threads; field sweeps parallelize over field points.

pub mod closedform;
pub mod config;
pub mod entanglement;
pub mod fitting;
pub mod spectrum;
pub mod transmission;

pub use config::{
    config_from_json, spin_frequency, thermal_coupling, validate_config, ChipConfig, ConfigError,
    CouplingEntry, LerParams, RawChipConfig, SpinEnsembleParams, KB_OVER_H_MHZ_PER_MK,
    MU_B_OVER_H_MHZ_PER_MT,
};
pub use spectrum::{
    build_hamiltonian, eigensolve, min_sorted_gap, normal_modes, polariton_angle, probabilities,
    track_branches, EigenSolution, FieldPoint, FieldSweep, GapMinimum, NormalModes,
    PolaritonBranch, SingleExcitationBasis, SlotLabel, SpectrumError,
};
pub use closedform::{
    bare_spin_resonance_field, crossing_field, dispersive_shifts, dispersive_spin_levels,
    effective_spin_spin_j, polariton_gap, predicted_gap_one_spin, pseudo_eigenenergies,
    remote_coupling, remote_coupling_of_pair, upper_polariton_gap, ClosedFormError, CrossingField,
    DispersiveReport, PolaritonGap, RemoteCouplingInputs, SpinSpinCoupling,
};
pub use transmission::{
    s21_closed_pair, s21_general, s21_general_opts, transmission_map, visibility_profile,
    MapOptions, OmegaGrid, ResponseMatrix, ResponseOptions, TransmissionError, TransmissionMap,
    VisibilityProfile,
};
pub use entanglement::{
    negativity, negativity_sweep, reduced_cavity_density_matrix, EntanglementError,
    NegativitySweep, TwoModeDensityMatrix,
};
pub use fitting::{
    fit_linewidth_vs_field, fit_resonance, fit_stretched_exponential, fit_thermal_polarization,
    trace_from_csv, trace_to_csv, FitError, FitParam, FitResult, LinewidthFixed, ThermalFixed,
    Trace, TraceValues,
};
