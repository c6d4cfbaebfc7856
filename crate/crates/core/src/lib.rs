//! Casimir energy of a perfectly reflecting sphere in front of a perfectly
//! reflecting plane at zero temperature, evaluated in the plane-wave basis.
//!
//! All quantities are nondimensional: ħ = c = 1 and lengths are measured in
//! units of the surface-to-surface gap `L`. Energies are reported in units of
//! ħc/L (see [`spectral::UnitSystem`]).
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: plane-wave channels, dispersion relation, scattering angle.
//! * [`special`]: scaled modified Bessel functions, E₁, Mie angular functions.
//! * [`mie`]: exact and WKB scattering amplitudes at imaginary frequency.
//! * [`reflection`]: Fresnel-basis matrix elements and the round-trip kernel.
//! * [`solver`]: Nyström discretisation, azimuthal blocks, log-determinants.
//! * [`asymptotics`]: PFA, saddle-point structures, closed-form traces, β's.
//! * [`oracles`]: finite-difference and brute-force checks of the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod mie;
pub mod oracles;
pub mod quadrature;
pub mod reflection;
pub mod report;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use reflection::KernelKind;
pub use solver::{energy, EnergyReport, QuadratureConfig};
pub use spectral::{Geometry, Polarization, SpectralPoint};
