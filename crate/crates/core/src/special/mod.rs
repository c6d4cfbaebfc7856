//! Scalar special functions with explicit log scales.
//!
//! Nothing in here is allowed to overflow: quantities that grow like
//! e^{2ξR sin(Θ/2)} are carried as [`ScaledValue`]s.

mod angular;
mod bessel;
mod expint;
mod scaled;

pub use angular::{pi_tau, AngularFunctions, AngularRecurrence};
pub use bessel::{bessel_ik_half_scaled, BesselHalfTable, BesselIK};
pub use expint::{exp_integral_e1, exp_integral_e1_scaled, EULER_GAMMA};
pub use scaled::ScaledValue;
