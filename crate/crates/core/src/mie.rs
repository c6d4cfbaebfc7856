//! Sphere scattering amplitudes S_⊥, S_∥ at imaginary frequency.
//!
//! Perfect-reflector Mie coefficients at x = ξR, with ν = ℓ + 1/2:
//!
//! ```text
//! b_ℓ = (−1)^{ℓ+1} (π/2) I_ν(x)/K_ν(x)
//! a_ℓ = (−1)^{ℓ}   (π/2) I_ν(x)/K_ν(x) · X_ℓ,
//! X_ℓ = ((ℓ+1)/x + I_{ν+1}/I_ν) / (K_{ν+1}/K_ν − (ℓ+1)/x)  > 0
//! ```
//!
//! In the dipole limit a₁ → −2x³/3 and b₁ → x³/3. With these signs every term
//! of S_⊥ is negative and every term of S_∥ positive for cosΘ ≤ −1, so the
//! partial-wave sums have no cancellation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{AngularRecurrence, BesselHalfTable, ScaledValue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MieCoefficient {
    pub ell: usize,
    pub a: ScaledValue,
    pub b: ScaledValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePair {
    pub s_perp: ScaledValue,
    pub s_par: ScaledValue,
}

/// Relative size of the certified tail at which partial-wave sums stop.
const TAIL_TOL: f64 = 1e-15;

/// Precomputed Mie data at fixed x = ξR, ℓ = 1..=ell_max.
#[derive(Debug, Clone)]
pub struct MieTable {
    x: f64,
    ln_b1: f64,
    /// |b_ℓ|/|b_{ℓ−1}| at index ℓ (index 0, 1 unused)
    b_step: Vec<f64>,
    /// |a_ℓ|/|b_ℓ| at index ℓ
    ab_ratio: Vec<f64>,
    ln_b: Vec<f64>,
}

impl MieTable {
    pub fn new(x: f64, ell_max: usize) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain("mie_ab", format!("x must be > 0, got {x}")));
        }
        let ell_max = ell_max.max(1);
        let bessel = BesselHalfTable::new(ell_max, x)?;
        let ln_half_pi = (0.5 * PI).ln();
        let mut b_step = vec![0.0; ell_max + 1];
        let mut ab_ratio = vec![0.0; ell_max + 1];
        let mut ln_b = vec![f64::NEG_INFINITY; ell_max + 1];
        for ell in 1..=ell_max {
            let lp1_x = (ell as f64 + 1.0) / x;
            ab_ratio[ell] = (lp1_x + bessel.ratio_i(ell)) / (bessel.ratio_k(ell) - lp1_x);
            ln_b[ell] = ln_half_pi + bessel.ln_i(ell) - bessel.ln_k(ell);
            if ell > 1 {
                b_step[ell] = bessel.ratio_i(ell - 1) / bessel.ratio_k(ell - 1);
            }
        }
        Ok(Self {
            x,
            ln_b1: ln_b[1],
            b_step,
            ab_ratio,
            ln_b,
        })
    }

    /// Table sized for every cosΘ with sin(Θ/2) ≤ `max_sin_half`.
    pub fn for_max_angle(x: f64, max_sin_half: f64) -> Result<Self> {
        Self::new(x, ell_cap(x, max_sin_half))
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn ell_max(&self) -> usize {
        self.ab_ratio.len() - 1
    }

    pub fn coefficient(&self, ell: usize) -> MieCoefficient {
        let b_sign = if ell % 2 == 1 { 1.0 } else { -1.0 };
        let b = ScaledValue::from_ln(b_sign, self.ln_b[ell]);
        MieCoefficient {
            ell,
            a: (-b).scale(self.ab_ratio[ell]),
            b,
        }
    }

    /// Partial-wave sums for cosΘ ≤ −1.
    pub fn amplitudes(&self, cos_theta: f64) -> Result<AmplitudePair> {
        if !(cos_theta <= -1.0) {
            return Err(Error::domain(
                "amplitudes_exact",
                format!("cos_theta must be <= -1, got {cos_theta}"),
            ));
        }
        let t = -cos_theta;
        let sin_half = ((1.0 + t) / 2.0).sqrt();
        let x_eff = self.x * sin_half;
        let ell_peak = self.x * (sin_half * sin_half - 1.0).max(0.0).sqrt();
        let mut rec = AngularRecurrence::new(cos_theta)?;

        // running magnitude |b_ℓ| π̃_ℓ, stored as mant·e^{offset}
        let mut offset = self.ln_b1;
        let mut mant = 1.0;
        let mut sum_perp = 0.0;
        let mut sum_par = 0.0;
        let mut prev = 0.0;
        for ell in 1..=self.ell_max() {
            let (p, tau_over_pi) = rec.advance();
            if ell > 1 {
                mant *= p * self.b_step[ell];
            }
            let l = ell as f64;
            let c = (2.0 * l + 1.0) / (l * (l + 1.0)) * mant;
            let xr = self.ab_ratio[ell];
            let term = c * (xr + tau_over_pi);
            sum_perp += term;
            sum_par += c * (xr * tau_over_pi + 1.0);

            if mant > 1e200 {
                mant *= 1e-200;
                sum_perp *= 1e-200;
                sum_par *= 1e-200;
                prev *= 1e-200;
                offset += 200.0 * std::f64::consts::LN_10;
                continue;
            }
            if l > ell_peak && l > 2.0 && prev > 0.0 {
                let rho = term / prev;
                if rho < 1.0 && term * rho / (1.0 - rho) < TAIL_TOL * sum_perp {
                    return Ok(AmplitudePair {
                        s_perp: ScaledValue::from_ln(-1.0, offset + sum_perp.ln()),
                        s_par: ScaledValue::from_ln(1.0, offset + sum_par.ln()),
                    });
                }
            }
            prev = term;
        }
        Err(Error::Truncation {
            ell_max: self.ell_max(),
            x: x_eff,
            cos_theta,
        })
    }
}

/// Upper bound on the partial-wave index needed at x and sin(Θ/2).
///
/// Terms peak near ℓ ≈ x·sqrt(sin²(Θ/2) − 1) with a width ~ sqrt(x sin(Θ/2)).
pub fn ell_cap(x: f64, sin_half: f64) -> usize {
    let x_eff = x * sin_half.max(1.0);
    let wiscombe = x_eff + 4.05 * x_eff.cbrt() + 2.0;
    let peak = x * (sin_half * sin_half - 1.0).max(0.0).sqrt() + 16.0 * x_eff.sqrt();
    (wiscombe.max(peak) + 40.0).ceil() as usize
}

pub fn mie_ab(ell: usize, x: f64) -> Result<MieCoefficient> {
    if ell == 0 {
        return Err(Error::domain("mie_ab", "ell must be >= 1"));
    }
    Ok(MieTable::new(x, ell)?.coefficient(ell))
}

/// Exact partial-wave amplitudes at x = ξR.
pub fn amplitudes_exact(xi: f64, radius: f64, cos_theta: f64) -> Result<AmplitudePair> {
    if !(xi > 0.0) || !(radius > 0.0) {
        return Err(Error::domain("amplitudes_exact", "xi and R must be > 0"));
    }
    if !(cos_theta <= -1.0) {
        return Err(Error::domain(
            "amplitudes_exact",
            format!("cos_theta must be <= -1, got {cos_theta}"),
        ));
    }
    let x = xi * radius;
    let sin_half = ((1.0 - cos_theta) / 2.0).sqrt();
    MieTable::for_max_angle(x, sin_half)?.amplitudes(cos_theta)
}

/// 1/R diffraction coefficients (s_⊥, s_∥) from cosΘ and ξ.
pub fn diffraction_coefficients(xi: f64, cos_theta: f64) -> (f64, f64) {
    let sin_half = ((1.0 - cos_theta) / 2.0).sqrt();
    let s3 = sin_half * sin_half * sin_half;
    (cos_theta / (2.0 * xi * s3), -1.0 / (2.0 * xi * s3))
}

/// WKB amplitudes, optionally including the 1/R diffraction factor.
pub fn amplitudes_wkb(xi: f64, radius: f64, cos_theta: f64, order: u8) -> Result<AmplitudePair> {
    if !(xi > 0.0) || !(radius > 0.0) {
        return Err(Error::domain("amplitudes_wkb", "xi and R must be > 0"));
    }
    if order > 1 {
        return Err(Error::domain(
            "amplitudes_wkb",
            format!("order must be 0 or 1, got {order}"),
        ));
    }
    let sin_half = ((1.0 - cos_theta) / 2.0).sqrt();
    if !(sin_half >= 1.0) {
        return Err(Error::domain(
            "amplitudes_wkb",
            format!("sin(theta/2) = {sin_half} < 1 is off the imaginary-frequency branch"),
        ));
    }
    let ln_mag = (0.5 * xi * radius).ln() + 2.0 * xi * radius * sin_half;
    let (f_perp, f_par) = if order == 1 {
        let (sp, sa) = diffraction_coefficients(xi, cos_theta);
        (1.0 + sp / radius, 1.0 + sa / radius)
    } else {
        (1.0, 1.0)
    };
    Ok(AmplitudePair {
        s_perp: ScaledValue::from_ln(-1.0, ln_mag).scale(f_perp),
        s_par: ScaledValue::from_ln(1.0, ln_mag).scale(f_par),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dipole_limit() {
        let x = 1e-3;
        let c = mie_ab(1, x).unwrap();
        assert!((c.b.value() / (x * x * x / 3.0) - 1.0).abs() < 1e-5);
        assert!((c.a.value() / (-2.0 * x * x * x / 3.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn super_exponential_cutoff() {
        let x = 7.0;
        let table = MieTable::new(x, 200).unwrap();
        let peak = (1..=200)
            .map(|l| {
                table
                    .coefficient(l)
                    .b
                    .ln_abs()
                    .max(table.coefficient(l).a.ln_abs())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let l = (10.0 * x) as usize + 50;
        let c = table.coefficient(l);
        assert!(c.a.ln_abs() - peak < -30.0 * std::f64::consts::LN_10);
        assert!(c.b.ln_abs() - peak < -30.0 * std::f64::consts::LN_10);
    }

    #[test]
    fn backscattering_amplitudes_are_opposite() {
        let p = amplitudes_exact(1.0, 20.0, -1.0).unwrap();
        assert!(p.s_perp.relative_difference(&(-p.s_par)) < 1e-13);
    }

    #[test]
    fn signs() {
        for &z in &[-1.0, -1.5, -30.0] {
            let e = amplitudes_exact(0.5, 10.0, z).unwrap();
            assert!(e.s_perp.signum() < 0.0 && e.s_par.signum() > 0.0);
            for order in [0, 1] {
                let w = amplitudes_wkb(0.5, 10.0, z, order).unwrap();
                assert!(w.s_perp.signum() < 0.0 && w.s_par.signum() > 0.0);
            }
        }
    }

    #[test]
    fn truncation_error_reported() {
        let table = MieTable::new(50.0, 20).unwrap();
        assert!(matches!(
            table.amplitudes(-2.0),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn backscattering_diffraction() {
        let xi = 1.0;
        let (sp, sa) = diffraction_coefficients(xi, -1.0);
        assert!((sp + 0.5 / xi).abs() < 1e-15 && (sa + 0.5 / xi).abs() < 1e-15);
    }
}
