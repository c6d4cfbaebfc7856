//! Angular functions π_ℓ(z), τ_ℓ(z) of Mie theory for |z| ≥ 1.
//!
//! π_ℓ = P_ℓ'(z), τ_ℓ = ℓ z π_ℓ − (ℓ+1) π_{ℓ−1}. On z ≤ −1 the signs alternate
//! as π_ℓ ∝ (−1)^{ℓ+1}, τ_ℓ ∝ (−1)^ℓ, so the recurrence is run on the
//! positive magnitudes with t = |z| and only the ratio π̃_ℓ/π̃_{ℓ−1} is carried.

use super::ScaledValue;
use crate::error::{Error, Result};

/// Streaming recurrence for the magnitudes π̃_ℓ = |π_ℓ|, τ̃_ℓ = |τ_ℓ|.
#[derive(Debug, Clone)]
pub struct AngularRecurrence {
    t: f64,
    ell: usize,
    ratio: f64,
}

impl AngularRecurrence {
    pub fn new(z: f64) -> Result<Self> {
        if !(z.abs() >= 1.0) || !z.is_finite() {
            return Err(Error::domain(
                "pi_tau",
                format!("|z| must be >= 1, got {z}"),
            ));
        }
        Ok(Self {
            t: z.abs(),
            ell: 0,
            ratio: 0.0,
        })
    }

    /// Index of the most recent step (0 before the first call to `advance`).
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Moves to the next ℓ and returns (π̃_ℓ/π̃_{ℓ−1}, τ̃_ℓ/π̃_ℓ).
    /// For ℓ = 1 the first entry is π̃_1 = 1 itself.
    #[inline]
    pub fn advance(&mut self) -> (f64, f64) {
        self.ell += 1;
        let l = self.ell as f64;
        let t = self.t;
        if self.ell == 1 {
            self.ratio = 1.0;
            return (1.0, t);
        }
        self.ratio = if self.ell == 2 {
            3.0 * t
        } else {
            ((2.0 * l - 1.0) * t - l / self.ratio) / (l - 1.0)
        };
        (self.ratio, l * t - (l + 1.0) / self.ratio)
    }
}

/// π_ℓ(z) and τ_ℓ(z) for ℓ = 1..=ell_max; index 0 holds ℓ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFunctions {
    pub pi: Vec<ScaledValue>,
    pub tau: Vec<ScaledValue>,
}

pub fn pi_tau(ell_max: usize, z: f64) -> Result<AngularFunctions> {
    let mut rec = AngularRecurrence::new(z)?;
    let negative = z < 0.0;
    let mut pi = Vec::with_capacity(ell_max);
    let mut tau = Vec::with_capacity(ell_max);
    let mut ln_pi = 0.0;
    for ell in 1..=ell_max {
        let (ratio, tau_over_pi) = rec.advance();
        ln_pi += ratio.ln();
        let (s_pi, s_tau) = if negative {
            if ell % 2 == 1 {
                (1.0, -1.0)
            } else {
                (-1.0, 1.0)
            }
        } else {
            (1.0, 1.0)
        };
        pi.push(ScaledValue::from_ln(s_pi, ln_pi));
        tau.push(ScaledValue::from_ln(s_tau, ln_pi + tau_over_pi.ln()));
    }
    Ok(AngularFunctions { pi, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_case() {
        for &z in &[-1.0, -2.5, -40.0, 3.0] {
            let f = pi_tau(1, z).unwrap();
            assert_eq!(f.pi[0].value(), 1.0);
            assert!((f.tau[0].value() - z).abs() < 1e-15 * z.abs());
        }
    }

    #[test]
    fn endpoint_identity() {
        let f = pi_tau(300, -1.0).unwrap();
        for ell in 1..=300usize {
            let l = ell as f64;
            let sign = if ell % 2 == 1 { 1.0 } else { -1.0 };
            let exact = sign * l * (l + 1.0) / 2.0;
            assert!(f.pi[ell - 1].relative_difference(&ScaledValue::from_f64(exact)) < 1e-12);
            // τ_ℓ(−1) = −π_ℓ(−1)
            assert!(f.tau[ell - 1].relative_difference(&ScaledValue::from_f64(-exact)) < 1e-10);
        }
    }

    #[test]
    fn real_angle_rejected() {
        assert!(pi_tau(5, -0.5).is_err());
        assert!(pi_tau(5, 0.0).is_err());
    }

    #[test]
    fn large_argument_stays_finite() {
        let f = pi_tau(5000, -1e4).unwrap();
        assert!(f.pi[4999].ln_abs().is_finite());
        assert!(f.pi[4999].ln_abs() > 4000.0 * 1e4f64.ln());
    }

    proptest! {
        #[test]
        fn recurrences_hold(z in -50.0f64..-1.0, ell in 3usize..150) {
            let f = pi_tau(ell, z).unwrap();
            let (p, pm1, pm2) = (f.pi[ell - 1], f.pi[ell - 2], f.pi[ell - 3]);
            let l = ell as f64;
            // (ℓ−1) π_ℓ = (2ℓ−1) z π_{ℓ−1} − ℓ π_{ℓ−2}
            let rhs = pm1.scale((2.0 * l - 1.0) * z).sub(pm2.scale(l)).scale(1.0 / (l - 1.0));
            prop_assert!(p.relative_difference(&rhs) < 1e-10);
            let tau = p.scale(l * z).sub(pm1.scale(l + 1.0));
            prop_assert!(f.tau[ell - 1].relative_difference(&tau) < 1e-9);
            let sign = if ell % 2 == 1 { 1.0 } else { -1.0 };
            prop_assert_eq!(p.signum(), sign);
        }
    }
}
