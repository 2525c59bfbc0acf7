//! Numerical models of an inductively coupled fluxonium pair.
//!
//! The crate covers the full chain from circuit parameters to gate-error
//! estimates: single-qubit spectra and effective two-level parameters
//! ([`qubit`]), the coupled-pair Hamiltonian with its native ZZ interaction
//! ([`coupled`]), flux-pulse schedules and CZ calibration ([`pulse`]),
//! flux-noise dephasing with analytic filter functions and a Monte Carlo
//! oracle ([`noise`]), and Landau-Zener / error-budget arithmetic
//! ([`adiabatic`]).
//!
//! Conventions: energies are linear frequencies in GHz (E/h), fluxes in
//! units of the flux quantum with the qubit sweet spot at 0.5, times in ns
//! except in [`noise`], which is SI. All instances are immutable values and
//! safe to share across threads; grid sweeps parallelize internally.

pub mod adiabatic;
pub mod coupled;
pub mod error;
pub mod noise;
pub mod operator;
pub mod pulse;
mod quad;
pub mod qubit;
pub mod units;

pub use adiabatic::{
    clifford_error, decoherence_limit, lz_probability, max_modulation_frequency, min_rise_time,
    phase_uncertainty_infidelity, AdiabaticBudget, CliffordCounting, ErrorBudget,
};
pub use coupled::{
    build_coupled_hamiltonian, conditional_spectrum, coupling_strengths_full,
    coupling_strengths_simplified, effective_j, find_resonance, zz_shift_exact, CoupledSystem,
    CouplingStrengths, ZZShift,
};
pub use error::{Error, Result};
pub use noise::{
    fit_double_exponential, generate_noise_trace, mc_dephasing, psd, static_dephasing_exponent,
    sinusoidal_dephasing_exponent, t2_from_decay, AlphaWaveform, DecayFit, DephasingResult,
    FilterKind, NoiseSpectrum,
};
pub use operator::{eigensystem, EigenSystem, HermitianOperator};
pub use pulse::{
    calibrate_cz, conditional_phase, cz_unitary, n_gate_conditional_phase, sample_pulse,
    single_qubit_phases, v_phi_map, CZResult, FluxPulse, GateSchedule, MapPulse, PhaseModel,
    PulseKind, VPhiMap,
};
pub use qubit::{
    build_single_hamiltonian, fit_two_level, flux_dispersion, mixing_angle, phase_matrix_element,
    transition_frequency, QubitLabel, QubitParams, TwoLevelParams,
};
