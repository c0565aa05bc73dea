//! Zero-field ODMR spectra of single NV centers under crystal strain.
//!
//! The ground-state spin of an NV center sits 2.87 GHz above its |0> level.
//! Lattice strain shifts and splits the |±1> levels and mixes them into
//! superpositions whose microwave transition strengths depend on the drive
//! angle, so the two dips of a zero-field ODMR spectrum move and acquire a
//! depth asymmetry that encodes the local strain. This crate provides
//!
//! * [`spin`] — spin-1 operators, the strained Hamiltonian, and its exact
//!   and numeric diagonalization;
//! * [`strain`] — strain tensors, frame rotation, coupling constants, and
//!   the canonical volumetric / shear scenarios;
//! * [`spectrum`] — forward synthesis of the dual-dip spectrum and the
//!   shift / splitting / imbalance observables;
//! * [`fit`] — dual-Lorentzian fitting of measured spectra and the
//!   inversion back to strain observables;
//! * [`geometry`] — NV axis and optical dipole directions for a
//!   (100)-oriented sample, and the photon readout fidelity model.
//!
//! All frequencies are in GHz and all operators use the |+1>, |0>, |-1>
//! basis. Every function here is a pure function of its arguments; the
//! value types are plain data, safe to share or send across threads.
//!
//! ```
//! use nv_strain::*;
//!
//! # fn main() -> Result<()> {
//! // Forward: transverse strain splits the zero-field line by 10 MHz.
//! let amps = StrainAmplitudes::new(-1e-3, 3e-3, 4e-3, 0.0, 0.0);
//! let model = SpectrumModel::new(2.87, amps, 0.35, 2e-3, 0.2 * 2e-3, 1.0)?;
//! let samples = synthesize(&model, &default_grid(2.87))?;
//!
//! // Inverse: fit the two dips and recover the strain observables.
//! let fit = fit_dual_lorentzian(&samples, None)?;
//! let estimate = invert_to_strain(&fit, 2.87, Some(model.phi_mw_rad))?;
//! assert!((estimate.m_z_hat_ghz - (-1e-3)).abs() < 1e-6);
//! assert!((estimate.m_perp_hat_ghz - 5e-3).abs() < 1e-6);
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod fit;
pub mod geometry;
pub mod spectrum;
pub mod spin;
pub mod strain;

pub use error::{Error, Result};
pub use fit::{
    fit_dual_lorentzian, fit_dual_lorentzian_with, initial_guess, invert_to_strain, FitOptions,
    FitParams, FitResult, StrainEstimate,
};
pub use geometry::{
    dipoles, fidelity_curve, nv_axis, readout_fidelity, standard_orientations, FidelityPoint,
    NvOrientation,
};
pub use spectrum::{
    default_grid, frequency_grid, lorentzian, metrics, synthesize, transition_amplitudes,
    transition_amplitudes_with, transition_frequencies, PhaseConvention, SpectrumModel,
    SpectrumSamples, StrainMetrics,
};
pub use spin::{
    analytic_levels, build_hamiltonian, eigensystem, spin1_matrices, strain_phase, EigenSystem,
    Hamiltonian, SpinOperatorSet, StrainAmplitudes,
};
pub use strain::{
    amplitudes_from_tensor, default_couplings, rotate_to_nv_frame, CouplingConstants, Frame,
    NvFrame, StrainScenario, StrainTensor,
};
