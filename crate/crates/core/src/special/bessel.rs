//! Modified Bessel functions I_{ℓ+1/2}(x), K_{ℓ+1/2}(x) for ℓ = 0, 1, ...
//!
//! K is generated by upward recurrence from the closed forms at ν = 1/2, 3/2,
//! carried as ratios q_ℓ = K_{ν+1}/K_ν plus an accumulated log. I is obtained
//! from the ratio r_ℓ = I_{ν+1}/I_ν (continued fraction at the top order,
//! then downward recurrence) and normalised through the Wronskian
//! I_ν K_{ν+1} + I_{ν+1} K_ν = 1/x.

use std::f64::consts::PI;

use super::ScaledValue;
use crate::error::{Error, Result};

/// Values and derivatives at a single order ν = ℓ + 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselIK {
    pub i: ScaledValue,
    pub k: ScaledValue,
    pub di: ScaledValue,
    pub dk: ScaledValue,
}

/// Log-scaled table of I_{ℓ+1/2}(x), K_{ℓ+1/2}(x) for ℓ = 0..=ell_max.
#[derive(Debug, Clone)]
pub struct BesselHalfTable {
    x: f64,
    ln_i: Vec<f64>,
    ln_k: Vec<f64>,
    /// I_{ν+1}/I_ν
    ratio_i: Vec<f64>,
    /// K_{ν+1}/K_ν
    ratio_k: Vec<f64>,
}

impl BesselHalfTable {
    pub fn new(ell_max: usize, x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(
                "bessel_ik_half",
                format!("x must be > 0, got {x}"),
            ));
        }
        let n = ell_max + 1;

        let mut ratio_k = Vec::with_capacity(n);
        let mut ln_k = Vec::with_capacity(n);
        // K_{1/2}(x) = sqrt(π/2x) e^{−x}, K_{3/2} = K_{1/2}(1 + 1/x)
        let mut q = 1.0 + 1.0 / x;
        let mut acc = 0.5 * (PI / (2.0 * x)).ln() - x;
        let mut comp = 0.0;
        for ell in 0..n {
            if ell > 0 {
                let nu = ell as f64 + 0.5;
                q = 2.0 * nu / x + 1.0 / q;
            }
            ln_k.push(acc);
            ratio_k.push(q);
            // Kahan-compensated accumulation of ln K
            let y = q.ln() - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }

        let mut ratio_i = vec![0.0; n];
        let nu_top = ell_max as f64 + 0.5;
        ratio_i[ell_max] = ratio_i_continued_fraction(nu_top, x)?;
        for ell in (1..n).rev() {
            let nu = ell as f64 + 0.5;
            ratio_i[ell - 1] = 1.0 / (2.0 * nu / x + ratio_i[ell]);
        }

        let ln_i = (0..n)
            .map(|ell| -x.ln() - ln_k[ell] - (ratio_k[ell] + ratio_i[ell]).ln())
            .collect();

        Ok(Self {
            x,
            ln_i,
            ln_k,
            ratio_i,
            ratio_k,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn ell_max(&self) -> usize {
        self.ln_k.len() - 1
    }

    pub fn ln_i(&self, ell: usize) -> f64 {
        self.ln_i[ell]
    }

    pub fn ln_k(&self, ell: usize) -> f64 {
        self.ln_k[ell]
    }

    /// I_{ν+1}(x)/I_ν(x) with ν = ℓ + 1/2.
    pub fn ratio_i(&self, ell: usize) -> f64 {
        self.ratio_i[ell]
    }

    /// K_{ν+1}(x)/K_ν(x) with ν = ℓ + 1/2.
    pub fn ratio_k(&self, ell: usize) -> f64 {
        self.ratio_k[ell]
    }

    pub fn get(&self, ell: usize) -> BesselIK {
        let nu_over_x = (ell as f64 + 0.5) / self.x;
        let i = ScaledValue::from_ln(1.0, self.ln_i[ell]);
        let k = ScaledValue::from_ln(1.0, self.ln_k[ell]);
        BesselIK {
            i,
            k,
            di: i.scale(self.ratio_i[ell] + nu_over_x),
            dk: k.scale(nu_over_x - self.ratio_k[ell]),
        }
    }
}

/// I_{ν+1}(x)/I_ν(x) by the modified Lentz algorithm.
fn ratio_i_continued_fraction(nu: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let max_iter = 10 * (x + nu) as usize + 10_000;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..=max_iter {
        let b = 2.0 * (nu + j as f64) / x;
        d += b;
        if d == 0.0 {
            d = TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Ok(f);
        }
    }
    Err(Error::domain(
        "bessel_ik_half",
        format!("continued fraction for I ratio did not converge (nu = {nu}, x = {x})"),
    ))
}

/// I_{ℓ+1/2}(x), K_{ℓ+1/2}(x) and their x-derivatives, log-scaled.
pub fn bessel_ik_half_scaled(ell: usize, x: f64) -> Result<BesselIK> {
    Ok(BesselHalfTable::new(ell, x)?.get(ell))
}
