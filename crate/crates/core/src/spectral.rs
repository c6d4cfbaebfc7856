//! Plane-wave channels in the angular spectral representation at imaginary
//! frequency, and the kinematics shared by every other module.
//!
//! A channel is labelled by the imaginary frequency ξ, the transverse wave
//! vector (modulus `k`, azimuth `phi`), the polarization and the sense of
//! propagation along ẑ. The longitudinal wavenumber follows from the
//! dispersion relation ξ² = κ² − k² (c = 1).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Unit conventions: ħ = c = 1 internally, energies exported in ħc/L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UnitSystem;

impl UnitSystem {
    pub const ENERGY_UNIT: &'static str = "hbar*c/L";
    /// ħc in J·m (CODATA 2018).
    pub const HBAR_C: f64 = 3.161_526_773_398_2e-26;

    /// Converts an energy in units of ħc/L to joules, given L in metres.
    pub fn to_joule(energy: f64, gap_in_metres: f64) -> f64 {
        energy * Self::HBAR_C / gap_in_metres
    }
}

/// Sphere radius `radius` and closest surface-to-surface gap `gap`, in any
/// common length unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub radius: f64,
    pub gap: f64,
}

impl Geometry {
    pub fn new(radius: f64, gap: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Geometry(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::Geometry(format!("gap must be positive, got {gap}")));
        }
        if !(radius / gap).is_finite() {
            return Err(Error::Geometry("aspect ratio R/L is not finite".into()));
        }
        Ok(Self { radius, gap })
    }

    /// Geometry with L = 1 and the given R/L.
    pub fn from_aspect_ratio(aspect_ratio: f64) -> Result<Self> {
        Self::new(aspect_ratio, 1.0)
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.radius / self.gap
    }

    /// Distance between the sphere centre and the plane, L + R.
    pub fn centre_distance(&self) -> f64 {
        self.radius + self.gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    TE,
    TM,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::TM, Polarization::TE];

    /// Block index used by the solver: TM first, TE second.
    pub fn index(self) -> usize {
        match self {
            Polarization::TM => 0,
            Polarization::TE => 1,
        }
    }
}

/// Sense of propagation along ẑ. `Up` travels from the plane towards the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

/// One plane-wave channel |ξ, k, p, ±⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub xi: f64,
    pub k: f64,
    pub phi: f64,
    pub pol: Polarization,
    pub dir: Direction,
}

impl SpectralPoint {
    pub fn new(xi: f64, k: f64, phi: f64, pol: Polarization, dir: Direction) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::domain(
                "SpectralPoint",
                format!("xi must be >= 0, got {xi}"),
            ));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::domain(
                "SpectralPoint",
                format!("k must be >= 0, got {k}"),
            ));
        }
        Ok(Self {
            xi,
            k,
            phi: phi.rem_euclid(2.0 * PI),
            pol,
            dir,
        })
    }

    /// Incoming channel at the sphere (travelling up, away from the plane).
    pub fn incoming(xi: f64, k: f64, phi: f64, pol: Polarization) -> Result<Self> {
        Self::new(xi, k, phi, pol, Direction::Up)
    }

    /// Outgoing channel at the sphere (travelling down, towards the plane).
    pub fn outgoing(xi: f64, k: f64, phi: f64, pol: Polarization) -> Result<Self> {
        Self::new(xi, k, phi, pol, Direction::Down)
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.xi, self.k)
    }

    pub fn with_pol(mut self, pol: Polarization) -> Self {
        self.pol = pol;
        self
    }
}

/// κ = sqrt(ξ² + k²), the positive root of the imaginary-frequency
/// dispersion relation.
pub fn kappa(xi: f64, k: f64) -> f64 {
    xi.hypot(k)
}

/// cos Θ = K̂_out · K̂_in continued to imaginary frequency,
/// (φ_out φ_in κ_in κ_out − k_in k_out cos Δφ) / ξ².
///
/// For an up-going incident and down-going scattered wave this is
/// −(κ_in κ_out + k_in·k_out)/ξ² ≤ −1.
pub fn cos_theta(inc: &SpectralPoint, out: &SpectralPoint) -> Result<f64> {
    if inc.xi != out.xi {
        return Err(Error::domain("cos_theta", "channels must share xi"));
    }
    if inc.xi == 0.0 {
        return Err(Error::DegenerateFrequency);
    }
    let xi2 = inc.xi * inc.xi;
    let dirs = inc.dir.sign() * out.dir.sign();
    let kk = inc.k * out.k * (out.phi - inc.phi).cos();
    Ok((dirs * inc.kappa() * out.kappa() - kk) / xi2)
}

/// sin(Θ/2) = sqrt((1 − cos Θ)/2); at least 1 for reflection channels.
pub fn sin_half_theta(inc: &SpectralPoint, out: &SpectralPoint) -> Result<f64> {
    let c = cos_theta(inc, out)?;
    Ok(((1.0 - c) / 2.0).sqrt())
}

/// 2ξ sin(Θ/2) for the reflection channel up → down, written so that it stays
/// regular at ξ = 0: sqrt(2(ξ² + κ_in κ_out + k_in k_out cos Δφ)).
pub fn momentum_transfer(xi: f64, k_in: f64, k_out: f64, delta_phi: f64) -> f64 {
    let s = kappa(xi, k_in) + kappa(xi, k_out);
    (s * s - transverse_gap2(k_in, k_out, delta_phi))
        .max(0.0)
        .sqrt()
}

/// |k_out − k_in|² for transverse vectors separated by Δφ.
pub fn transverse_gap2(k_in: f64, k_out: f64, delta_phi: f64) -> f64 {
    let d = k_in - k_out;
    // k² + k'² − 2kk' cos Δφ without cancellation near Δφ = 0
    d * d + 4.0 * k_in * k_out * (0.5 * delta_phi).sin().powi(2)
}

/// Round-trip phase η = κ_in + κ_out − 2ξ sin(Θ/2) ≥ 0, evaluated stably as
/// d²/(S + sqrt(S² − d²)) with S = κ_in + κ_out and d = |k_out − k_in|.
pub fn round_trip_phase(xi: f64, k_in: f64, k_out: f64, delta_phi: f64) -> f64 {
    let s = kappa(xi, k_in) + kappa(xi, k_out);
    let d2 = transverse_gap2(k_in, k_out, delta_phi);
    d2 / (s + (s * s - d2).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(xi: f64, k: f64, phi: f64) -> SpectralPoint {
        SpectralPoint::incoming(xi, k, phi, Polarization::TE).unwrap()
    }
    fn down(xi: f64, k: f64, phi: f64) -> SpectralPoint {
        SpectralPoint::outgoing(xi, k, phi, Polarization::TE).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(0.0, 3.0), 3.0);
        assert_eq!(kappa(4.0, 3.0), 5.0);
        assert!((kappa(1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cos_theta_examples() {
        let c = cos_theta(&up(2.0, 0.0, 0.0), &down(2.0, 0.0, 1.3)).unwrap();
        assert_eq!(c, -1.0);

        let (xi, k) = (0.7, 1.9);
        let c = cos_theta(&up(xi, k, 0.4), &down(xi, k, 0.4)).unwrap();
        let expect = -(1.0 + 2.0 * k * k / (xi * xi));
        assert!((c - expect).abs() < 1e-13 * expect.abs());

        // ξ = 1, k_in = 1, k_out = 2, Δφ = π/2: −κ_in κ_out = −√2·√5
        let c = cos_theta(&up(1.0, 1.0, 0.0), &down(1.0, 2.0, PI / 2.0)).unwrap();
        assert!((c + 2f64.sqrt() * 5f64.sqrt()).abs() < 1e-14);
        let s = sin_half_theta(&up(1.0, 1.0, 0.0), &down(1.0, 2.0, PI / 2.0)).unwrap();
        assert!((s - ((1.0 + 10f64.sqrt()) / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cos_theta_rejects_zero_frequency() {
        assert_eq!(
            cos_theta(&up(0.0, 1.0, 0.0), &down(0.0, 1.0, 0.0)),
            Err(Error::DegenerateFrequency)
        );
    }

    #[test]
    fn specular_sin_half_theta_is_kappa_over_xi() {
        for &xi in &[0.01, 0.3, 1.0, 7.0] {
            for &k in &[0.0, 0.2, 1.0, 5.0, 40.0] {
                let s = sin_half_theta(&up(xi, k, 0.3), &down(xi, k, 0.3)).unwrap();
                let kap = kappa(xi, k);
                assert!((s * xi - kap).abs() < 1e-12 * kap, "xi={xi} k={k}");
                assert!((momentum_transfer(xi, k, k, 0.0) - 2.0 * kap).abs() < 1e-12 * kap);
            }
        }
    }

    #[test]
    fn backscattering_only_at_normal_incidence() {
        for &(ki, ko) in &[(0.0, 0.0), (1e-3, 0.0), (0.0, 0.5), (0.3, 0.3)] {
            let c = cos_theta(&up(1.0, ki, 0.0), &down(1.0, ko, 0.0)).unwrap();
            if ki == 0.0 && ko == 0.0 {
                assert_eq!(c, -1.0);
            } else {
                assert!(c < -1.0);
            }
        }
    }

    #[test]
    fn round_trip_phase_matches_direct_form() {
        let (xi, ki, ko, dphi) = (0.8, 1.3, 0.4, 2.1);
        let direct = kappa(xi, ki) + kappa(xi, ko) - momentum_transfer(xi, ki, ko, dphi);
        assert!((round_trip_phase(xi, ki, ko, dphi) - direct).abs() < 1e-13);
        assert_eq!(round_trip_phase(xi, 1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::new(1.0, 0.0).is_err());
        assert!(Geometry::new(-1.0, 1.0).is_err());
        assert!(Geometry::new(f64::INFINITY, 1.0).is_err());
        let g = Geometry::new(50.0, 2.0).unwrap();
        assert_eq!(g.aspect_ratio(), 25.0);
        assert_eq!(g.centre_distance(), 52.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kappa_bounds(xi in 0.0f64..50.0, k in 0.0f64..50.0) {
                let kap = kappa(xi, k);
                prop_assert!(kap >= xi);
                if k == 0.0 { prop_assert_eq!(kap, xi); }
            }

            #[test]
            fn cos_theta_symmetric_and_below_minus_one(
                xi in 1e-3f64..20.0, ki in 0.0f64..20.0, ko in 0.0f64..20.0,
                pi_ in 0.0f64..std::f64::consts::TAU, po in 0.0f64..std::f64::consts::TAU,
            ) {
                let a = cos_theta(&up(xi, ki, pi_), &down(xi, ko, po)).unwrap();
                let b = cos_theta(&up(xi, ko, po), &down(xi, ki, pi_)).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
                prop_assert!(a <= -1.0 + 1e-15 * a.abs());
            }
        }
    }
}
