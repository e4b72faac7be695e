//! Two-photon Werner-state simulation, polarization tomography and
//! entanglement analysis.
//!
//! The crate is organised bottom-up:
//!
//! - [`qlinalg`]: small dense complex matrices, Hermitian eigensolver, PSD square root.
//! - [`states`]: Bell and Werner states, the two-crystal mixed source, local unitaries.
//! - [`polarimetry`]: analyzer projectors, the 16-setting schedule, Poissonian count simulation.
//! - [`tomography`]: linear (Stokes) inversion and maximum-likelihood reconstruction.
//! - [`analysis`]: fidelity, Werner fit, linear entropy, concurrence/tangle, CHSH.
//! - [`decoherence`]: frequency-polarization dephasing in birefringent media.
//!
//! All randomness is driven by explicit seeds so every pipeline stage is
//! reproducible bit-for-bit.

pub mod analysis;
pub mod decoherence;
mod error;
pub mod fixtures;
pub mod optimize;
pub mod polarimetry;
pub mod qlinalg;
pub mod states;
pub mod tolerances;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
