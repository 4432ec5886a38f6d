//! Semiclassical spectra and moment dynamics for Hartree-type operators.
//!
//! The pipeline is: a [`SymbolModel`] describes the operator through its symbols;
//! [`find_rest_point`] locates an equilibrium of the principal mean dynamics;
//! [`solve_modes`] gives its normal modes; [`corrected_frequencies`] and
//! [`energy_levels`] turn those into an order-`hbar` spectrum. The [`dynamics`]
//! module integrates the moment systems in time.

// NaN-rejecting guards are written `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod modes;
pub mod restpoint;
pub mod spectrum;
pub mod symbols;

pub use dynamics::{
    extract_trajectory_frequencies, forcing_f, gaussian_initial_moments, integrate, integrate_with, reconstruct_z1,
    rhs_order0, rhs_order2, ComponentSelector, EvolutionMode, IntegrateOptions, MomentState, Peak, Trajectory,
};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use modes::{skew_product, solve_modes, solve_modes_with, ModeOptions, ModeSet};
pub use restpoint::{find_rest_point, verify_rest_point, RestPoint};
pub use spectrum::{
    closed_form_spectrum_1d, closed_form_spectrum_3d, corrected_frequencies, energy_levels, ground_energy,
    stationary_action_rate, stationary_moments, stationary_z1, transition_frequency, CorrectedFrequencies, Level,
    MultiIndex, SpectrumTable, StationaryMoments,
};
pub use symbols::builtin::{
    make_magnetic_oscillator_3d, make_oscillator_1d, MagneticOscillator3dParams, Oscillator1dParams,
};
pub use symbols::{check_derivatives, DerivativeCheck, DerivativeMode, HartreeSymbol, PhasePoint, SymbolModel};
