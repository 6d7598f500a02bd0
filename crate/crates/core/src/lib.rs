//! Conditional collective-spin states prepared by counting the photons that an
//! atomic ensemble Faraday-scatters into a single polarization channel.
//!
//! The crate works in the Dicke basis `|S, M>` of `N_a` two-level atoms
//! (`S = N_a / 2`). A probe pulse of dimensionless strength `C` entangles each
//! `S_z` eigenstate `M` with a coherent field `|-iCM>`; counting the scattered
//! photons collapses the atoms onto a squeezed state (zero counts) or a
//! two-armed "cat" superposition (nonzero counts).
//!
//! Module map:
//!
//! * [`spin_basis`]: Dicke states, binomial amplitudes, spin moments, squeezing.
//! * [`pulse_scattering`]: the pulse interaction and photon-count statistics.
//! * [`detection`]: collapse for perfect and inefficient detectors, sampling,
//!   sequential-pulse trajectories.
//! * [`cat_analysis`]: peak positions, widths and coherence of collapsed states.
//! * [`physical_params`]: laboratory parameters to `C`, `C_spon`, `d_res`, `eta`,
//!   and the decay-limited squeezing optimum.
//! * [`fock_oracle`]: brute-force truncated-Fock reference used for validation.

// Negated comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cat_analysis;
pub mod detection;
pub mod error;
pub mod fock_oracle;
pub mod numerics;
pub mod physical_params;
pub mod pulse_scattering;
pub mod spin_basis;

pub use error::{Error, Result};
pub use num_complex::Complex64;
