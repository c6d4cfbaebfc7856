//! Sphere reflection matrix elements in the Fresnel (TE/TM) basis and the
//! symmetrized round-trip kernel.
//!
//! The kernel entering the round-trip operator for a leg `in → out` is
//!
//! ```text
//! K[p_out][p_in] = e^{−κ_out(L+R)} ⟨out, p_out| R_S |in, p_in⟩ e^{−κ_in(L+R)} r_{p_in} · sqrt(κ_out/κ_in)
//! ```
//!
//! The similarity factor sqrt(κ_out/κ_in) turns the 1/κ_out of the matrix
//! elements into 1/sqrt(κ_in κ_out). With it, K(in→out, Δφ) is the transpose of
//! K(out→in, −Δφ).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mie::{amplitudes_exact, MieTable};
use crate::special::ScaledValue;
use crate::spectral::{
    kappa, momentum_transfer, round_trip_phase, Geometry, Polarization, SpectralPoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "exact-mie")]
    ExactMie,
    #[serde(rename = "wkb0")]
    Wkb0,
    #[serde(rename = "wkb1")]
    Wkb1,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::ExactMie, KernelKind::Wkb0, KernelKind::Wkb1];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::ExactMie => "exact-mie",
            KernelKind::Wkb0 => "wkb0",
            KernelKind::Wkb1 => "wkb1",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-mie" | "exact" | "mie" => Ok(KernelKind::ExactMie),
            "wkb0" => Ok(KernelKind::Wkb0),
            "wkb1" => Ok(KernelKind::Wkb1),
            other => Err(Error::Config(format!("unknown kernel kind '{other}'"))),
        }
    }
}

/// Tilt of the two Fresnel planes against the scattering plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub chi_in: f64,
    pub chi_out: f64,
}

impl RotationCoefficients {
    pub const SPECULAR: RotationCoefficients = RotationCoefficients {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        chi_in: 0.0,
        chi_out: 0.0,
    };

    fn from_angles(cos_in: f64, sin_in: f64, cos_out: f64, sin_out: f64) -> Self {
        RotationCoefficients {
            a: cos_out * cos_in,
            b: sin_out * sin_in,
            c: sin_out * cos_in,
            d: -cos_out * sin_in,
            chi_in: sin_in.atan2(cos_in),
            chi_out: sin_out.atan2(cos_out),
        }
    }

    /// Closed form in (ξ, k_in, k_out, Δφ = φ_out − φ_in) for an up-going
    /// incident and down-going scattered wave:
    ///
    /// ```text
    /// P_in  = k_out κ_in cos Δφ + κ_out k_in,   P_out = k_in κ_out cos Δφ + κ_in k_out
    /// cos χ_in  = P_in /N,  sin χ_in  = ξ k_out sin Δφ / N
    /// cos χ_out = P_out/N,  sin χ_out = ξ k_in  sin Δφ / N
    /// ```
    ///
    /// with N² = P_in² + ξ²k_out² sin²Δφ = P_out² + ξ²k_in² sin²Δφ = ξ⁴(cos²Θ − 1).
    #[inline]
    pub fn from_kinematics(xi: f64, k_in: f64, k_out: f64, delta_phi: f64) -> Self {
        let (sin_d, cos_d) = delta_phi.sin_cos();
        let kap_in = kappa(xi, k_in);
        let kap_out = kappa(xi, k_out);
        let p_in = k_out * kap_in * cos_d + kap_out * k_in;
        let p_out = k_in * kap_out * cos_d + kap_in * k_out;
        let y_in = xi * k_out * sin_d;
        let y_out = xi * k_in * sin_d;
        let n_in = p_in.hypot(y_in);
        let n_out = p_out.hypot(y_out);
        if n_in == 0.0 || n_out == 0.0 {
            return if k_in == 0.0 && k_out == 0.0 {
                // normal incidence: limit along k_in = k_out → 0
                let (s, c) = (0.5 * delta_phi).sin_cos();
                Self::from_angles(c, s, c, s)
            } else {
                // exact backscattering off the normal: the limit Δφ → π
                Self::from_angles(0.0, 1.0, 0.0, 1.0)
            };
        }
        Self::from_angles(p_in / n_in, y_in / n_in, p_out / n_out, y_out / n_out)
    }
}

/// Rotation coefficients for an incident channel `inc` (up) and scattered
/// channel `out` (down).
pub fn rotation_coefficients(
    inc: &SpectralPoint,
    out: &SpectralPoint,
) -> Result<RotationCoefficients> {
    check_pair(inc, out)?;
    Ok(RotationCoefficients::from_kinematics(
        inc.xi,
        inc.k,
        out.k,
        out.phi - inc.phi,
    ))
}

fn check_pair(inc: &SpectralPoint, out: &SpectralPoint) -> Result<()> {
    if inc.xi != out.xi {
        return Err(Error::domain(
            "rotation_coefficients",
            "channels must share xi",
        ));
    }
    if inc.dir.sign() < 0.0 || out.dir.sign() > 0.0 {
        return Err(Error::domain(
            "rotation_coefficients",
            "expected an up-going incident and a down-going scattered channel",
        ));
    }
    Ok(())
}

/// Fresnel coefficient of the perfectly reflecting plane.
pub fn plane_reflection(p: Polarization) -> f64 {
    match p {
        Polarization::TM => 1.0,
        Polarization::TE => -1.0,
    }
}

/// Exact combination of amplitudes, indexed `[p_out][p_in]` (TM = 0, TE = 1),
/// without the 2π/(ξκ_out) prefactor.
#[inline]
pub fn fresnel_combination(rot: &RotationCoefficients, s_perp: f64, s_par: f64) -> [[f64; 2]; 2] {
    let RotationCoefficients { a, b, c, d, .. } = *rot;
    [
        [a * s_par + b * s_perp, -(c * s_perp + d * s_par)],
        [c * s_par + d * s_perp, a * s_perp + b * s_par],
    ]
}

/// Asymptotic ρ coefficients indexed `[p_out][p_in]`; `order` 0 drops the 1/R terms.
#[inline]
pub fn rho_table(
    rot: &RotationCoefficients,
    s_perp: f64,
    s_par: f64,
    radius: f64,
    order: u8,
) -> [[f64; 2]; 2] {
    let RotationCoefficients { a, b, c, d, .. } = *rot;
    let amb = a - b;
    let cmd = c - d;
    if order == 0 {
        return [[amb, cmd], [cmd, -amb]];
    }
    let inv_r = 1.0 / radius;
    [
        [
            amb + inv_r * (a * s_par - b * s_perp),
            cmd + inv_r * (c * s_par - d * s_perp),
        ],
        [
            cmd + inv_r * (c * s_perp - d * s_par),
            -amb - inv_r * (a * s_perp - b * s_par),
        ],
    ]
}

/// Diffraction coefficients written without 1/ξ so they stay finite as ξ → 0:
/// with W = 2ξ sin(Θ/2), s_⊥ = 4ξ² cosΘ/W³ and s_∥ = −4ξ²/W³.
///
/// Where WR ≲ 1 the expansion in 1/R has broken down and 1 + s/R changes
/// sign, which makes the kernel unbounded near ξ = k = 0. The kernel uses
/// s/(1 + (s/R)²) instead: identical up to O(R⁻³) where the expansion holds,
/// and |s/R| ≤ 1/2 everywhere.
#[inline]
fn regular_diffraction(
    xi: f64,
    k_in: f64,
    k_out: f64,
    delta_phi: f64,
    w: f64,
    radius: f64,
) -> (f64, f64) {
    let w3 = w * w * w;
    let xi2_cos = -(kappa(xi, k_in) * kappa(xi, k_out) + k_in * k_out * delta_phi.cos());
    let taper = |s: f64| {
        let q = s / radius;
        s / (1.0 + q * q)
    };
    (taper(4.0 * xi2_cos / w3), taper(-4.0 * xi * xi / w3))
}

/// ⟨out, p_out| R_S |in, p_in⟩ with polarizations taken from the channels.
pub fn sphere_matrix_element(
    inc: &SpectralPoint,
    out: &SpectralPoint,
    radius: f64,
    kind: KernelKind,
) -> Result<ScaledValue> {
    check_pair(inc, out)?;
    if !(radius > 0.0) {
        return Err(Error::Geometry(format!("radius must be > 0, got {radius}")));
    }
    let xi = inc.xi;
    if xi == 0.0 {
        return Err(Error::DegenerateFrequency);
    }
    let rot = rotation_coefficients(inc, out)?;
    let (po, pi) = (out.pol.index(), inc.pol.index());
    let kap_out = out.kappa();
    match kind {
        KernelKind::ExactMie => {
            let cos_theta = crate::spectral::cos_theta(inc, out)?;
            let amp = amplitudes_exact(xi, radius, cos_theta)?;
            // factor out the common scale so that the combination is formed in f64
            let shift = amp.s_perp.ln_abs().max(amp.s_par.ln_abs());
            let x = fresnel_combination(
                &rot,
                amp.s_perp.value_shifted(shift),
                amp.s_par.value_shifted(shift),
            );
            Ok(ScaledValue::new(
                x[po][pi] * 2.0 * PI / (xi * kap_out),
                shift,
            ))
        }
        KernelKind::Wkb0 | KernelKind::Wkb1 => {
            let delta = out.phi - inc.phi;
            let w = momentum_transfer(xi, inc.k, out.k, delta);
            let (sp, sa) = regular_diffraction(xi, inc.k, out.k, delta, w, radius);
            let order = if kind == KernelKind::Wkb1 { 1 } else { 0 };
            let rho = rho_table(&rot, sp, sa, radius, order);
            Ok(ScaledValue::new(
                PI * radius / kap_out * rho[po][pi],
                radius * w,
            ))
        }
    }
}

/// One symmetrized leg of the round trip, including r_{p_in} and both
/// translation half-factors; quadrature weights are left to the solver.
pub fn symmetrized_round_trip_element(
    inc: &SpectralPoint,
    out: &SpectralPoint,
    geometry: &Geometry,
    kind: KernelKind,
) -> Result<f64> {
    let element = sphere_matrix_element(inc, out, geometry.radius, kind)?;
    let (kap_in, kap_out) = (inc.kappa(), out.kappa());
    let translation = -(kap_in + kap_out) * geometry.centre_distance();
    Ok(element.value_shifted(-translation) * (kap_out / kap_in).sqrt() * plane_reflection(inc.pol))
}

/// Round-trip kernel at fixed ξ for the solver's hot loop.
#[derive(Debug, Clone)]
pub struct RoundTripKernel {
    xi: f64,
    radius: f64,
    gap: f64,
    kind: KernelKind,
    mie: Option<MieTable>,
}

impl RoundTripKernel {
    /// `k_max` bounds the transverse wavenumbers that will be requested; it
    /// sizes the Mie table of the exact kernel.
    pub fn new(xi: f64, geometry: &Geometry, kind: KernelKind, k_max: f64) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(Error::domain(
                "RoundTripKernel",
                format!("xi must be > 0, got {xi}"),
            ));
        }
        let mie = match kind {
            KernelKind::ExactMie => {
                let kap = kappa(xi, k_max);
                Some(MieTable::for_max_angle(xi * geometry.radius, kap / xi)?)
            }
            _ => None,
        };
        Ok(Self {
            xi,
            radius: geometry.radius,
            gap: geometry.gap,
            kind,
            mie,
        })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Natural log of the largest possible |K| entry for this pair, used to
    /// skip pairs that cannot contribute.
    #[inline]
    pub fn log_envelope(&self, k_in: f64, k_out: f64) -> f64 {
        let (ki, ko) = (kappa(self.xi, k_in), kappa(self.xi, k_out));
        -(ki + ko) * self.gap + (PI * self.radius).ln() - 0.5 * (ki * ko).ln()
    }

    /// K[p_out][p_in] (TM = 0, TE = 1) at Δφ = φ_out − φ_in.
    #[inline]
    pub fn eval(&self, k_in: f64, k_out: f64, delta_phi: f64) -> Result<[[f64; 2]; 2]> {
        let xi = self.xi;
        let rot = RotationCoefficients::from_kinematics(xi, k_in, k_out, delta_phi);
        let kap_in = kappa(xi, k_in);
        let kap_out = kappa(xi, k_out);
        let sym = 1.0 / (kap_in * kap_out).sqrt();
        let mut m = match &self.mie {
            Some(table) => {
                let cos_theta = -(kap_in * kap_out + k_in * k_out * delta_phi.cos()) / (xi * xi);
                let amp = table.amplitudes(cos_theta.min(-1.0))?;
                let shift = (kap_in + kap_out) * (self.gap + self.radius);
                let pref = 2.0 * PI / xi * sym;
                let x = fresnel_combination(
                    &rot,
                    amp.s_perp.value_shifted(shift),
                    amp.s_par.value_shifted(shift),
                );
                [
                    [pref * x[0][0], pref * x[0][1]],
                    [pref * x[1][0], pref * x[1][1]],
                ]
            }
            None => {
                let w = momentum_transfer(xi, k_in, k_out, delta_phi);
                let eta = round_trip_phase(xi, k_in, k_out, delta_phi);
                let (sp, sa) = regular_diffraction(xi, k_in, k_out, delta_phi, w, self.radius);
                let order = if self.kind == KernelKind::Wkb1 { 1 } else { 0 };
                let rho = rho_table(&rot, sp, sa, self.radius, order);
                let pref = PI
                    * self.radius
                    * sym
                    * (-(kap_in + kap_out) * self.gap - self.radius * eta).exp();
                [
                    [pref * rho[0][0], pref * rho[0][1]],
                    [pref * rho[1][0], pref * rho[1][1]],
                ]
            }
        };
        // r_TE = −1 on the incoming leg
        m[0][1] = -m[0][1];
        m[1][1] = -m[1][1];
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Direction;
    use proptest::prelude::*;

    fn pair(
        xi: f64,
        ki: f64,
        ko: f64,
        dphi: f64,
        pi: Polarization,
        po: Polarization,
    ) -> (SpectralPoint, SpectralPoint) {
        (
            SpectralPoint::new(xi, ki, 0.3, pi, Direction::Up).unwrap(),
            SpectralPoint::new(xi, ko, 0.3 + dphi, po, Direction::Down).unwrap(),
        )
    }

    #[test]
    fn specular_limit() {
        let r = RotationCoefficients::from_kinematics(1.3, 0.7, 0.7, 0.0);
        assert!(
            (r.a - 1.0).abs() < 1e-15
                && r.b.abs() < 1e-15
                && r.c.abs() < 1e-15
                && r.d.abs() < 1e-15
        );
        let r = RotationCoefficients::from_kinematics(1.3, 0.2, 1.7, 0.0);
        assert_eq!((r.b, r.c, r.d), (0.0, 0.0, 0.0));
    }

    #[test]
    fn specular_wkb0_rho() {
        let rho = rho_table(&RotationCoefficients::SPECULAR, -0.3, -0.2, 10.0, 0);
        assert_eq!(rho, [[1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn plane_coefficients() {
        assert_eq!(plane_reflection(Polarization::TM), 1.0);
        assert_eq!(plane_reflection(Polarization::TE), -1.0);
    }

    #[test]
    fn coplanar_elements_do_not_mix_polarizations() {
        for kind in KernelKind::ALL {
            for &(ki, ko) in &[(0.4, 1.1), (2.0, 0.3)] {
                let (i, o) = pair(0.8, ki, ko, 0.0, Polarization::TE, Polarization::TM);
                assert!(sphere_matrix_element(&i, &o, 5.0, kind).unwrap().is_zero());
                let (i, o) = pair(0.8, ki, ko, 0.0, Polarization::TM, Polarization::TE);
                assert!(sphere_matrix_element(&i, &o, 5.0, kind).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn kernel_kind_parsing() {
        for kind in KernelKind::ALL {
            assert_eq!(kind.name().parse::<KernelKind>().unwrap(), kind);
        }
        assert!("wkb2".parse::<KernelKind>().is_err());
    }

    #[test]
    fn hot_path_matches_channel_api() {
        let geom = Geometry::new(7.0, 1.0).unwrap();
        for kind in KernelKind::ALL {
            let kernel = RoundTripKernel::new(0.9, &geom, kind, 3.0).unwrap();
            let (ki, ko, d) = (0.6, 1.4, 0.8);
            let m = kernel.eval(ki, ko, d).unwrap();
            for po in Polarization::BOTH {
                for pi in Polarization::BOTH {
                    let (i, o) = pair(0.9, ki, ko, d, pi, po);
                    let v = symmetrized_round_trip_element(&i, &o, &geom, kind).unwrap();
                    let h = m[po.index()][pi.index()];
                    assert!(
                        (v - h).abs() <= 1e-12 * v.abs().max(1e-300),
                        "{kind} {po:?}{pi:?} {v} {h}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn product_identities(xi in 0.01f64..5.0, ki in 0.0f64..5.0, ko in 0.0f64..5.0, d in -3.1f64..3.1) {
            let r = RotationCoefficients::from_kinematics(xi, ki, ko, d);
            prop_assert!((r.a * r.b + r.c * r.d).abs() < 1e-12);
            prop_assert!((r.a * r.a + r.c * r.c - r.chi_in.cos().powi(2)).abs() < 1e-12);
            prop_assert!((r.a * r.a + r.d * r.d - r.chi_out.cos().powi(2)).abs() < 1e-12);
        }

        #[test]
        fn swap_symmetry(xi in 0.01f64..5.0, ki in 0.01f64..5.0, ko in 0.01f64..5.0, d in -3.1f64..3.1) {
            let r = RotationCoefficients::from_kinematics(xi, ki, ko, d);
            let s = RotationCoefficients::from_kinematics(xi, ko, ki, -d);
            prop_assert!((r.a - s.a).abs() < 1e-12 && (r.b - s.b).abs() < 1e-12);
            prop_assert!((r.c - s.d).abs() < 1e-12 && (r.d - s.c).abs() < 1e-12);
        }

        #[test]
        fn kernel_is_transpose_symmetric(xi in 0.05f64..3.0, ki in 0.01f64..4.0, ko in 0.01f64..4.0, d in -3.1f64..3.1) {
            let geom = Geometry::new(6.0, 1.0).unwrap();
            for kind in KernelKind::ALL {
                let kernel = RoundTripKernel::new(xi, &geom, kind, 4.0).unwrap();
                let a = kernel.eval(ki, ko, d).unwrap();
                let b = kernel.eval(ko, ki, -d).unwrap();
                let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                for p in 0..2 {
                    for q in 0..2 {
                        prop_assert!((a[p][q] - b[q][p]).abs() <= 1e-11 * scale);
                    }
                }
            }
        }

        #[test]
        fn rho_sum_identity(a in -1.0f64..1.0, b in -1.0f64..1.0, sp in -2.0f64..0.0, sa in -2.0f64..0.0, r in 1.0f64..100.0) {
            let rot = RotationCoefficients { a, b, c: 0.0, d: 0.0, chi_in: 0.0, chi_out: 0.0 };
            let rho = rho_table(&rot, sp, sa, r, 1);
            let expect = (a * (sa - sp) - b * (sp - sa)) / r;
            prop_assert!((rho[0][0] + rho[1][1] - expect).abs() < 1e-13);
        }
    }
}
