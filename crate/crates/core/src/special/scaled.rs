use std::cmp::Ordering;
use std::ops::{Mul, Neg};

/// A real number stored as `mantissa · exp(log_scale)`.
///
/// Normalised so that the mantissa is exactly −1, 0 or +1; the representation
/// of a nonzero value is then unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    mantissa: f64,
    log_scale: f64,
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        log_scale: f64::NEG_INFINITY,
    };
    pub const ONE: ScaledValue = ScaledValue {
        mantissa: 1.0,
        log_scale: 0.0,
    };

    /// Builds `mantissa · e^{log_scale}` from any finite mantissa.
    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        if mantissa == 0.0 || log_scale == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self {
            mantissa: mantissa.signum(),
            log_scale: log_scale + mantissa.abs().ln(),
        }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    /// `sign · e^{ln_abs}`.
    pub fn from_ln(sign: f64, ln_abs: f64) -> Self {
        Self::new(sign.signum(), ln_abs)
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn signum(&self) -> f64 {
        self.mantissa
    }

    pub fn ln_abs(&self) -> f64 {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Plain floating-point value; may overflow to ±∞ or underflow to 0.
    pub fn value(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    /// value · e^{−shift}, evaluated without forming the value itself.
    pub fn value_shifted(&self, shift: f64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa * (self.log_scale - shift).exp()
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.mantissa * factor, self.log_scale)
    }

    pub fn mul_exp(self, exponent: f64) -> Self {
        Self::new(self.mantissa, self.log_scale + exponent)
    }

    pub fn abs(self) -> Self {
        Self::new(self.mantissa.abs(), self.log_scale)
    }

    pub fn recip(self) -> Self {
        Self::new(self.mantissa, -self.log_scale)
    }

    pub fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_scale >= other.log_scale {
            (self, other)
        } else {
            (other, self)
        };
        let m = big.mantissa + small.mantissa * (small.log_scale - big.log_scale).exp();
        Self::new(m, big.log_scale)
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    pub fn div(self, other: Self) -> Self {
        self * other.recip()
    }

    /// Compares magnitudes.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        self.log_scale
            .partial_cmp(&other.log_scale)
            .unwrap_or(Ordering::Equal)
    }

    /// |self/other − 1|, computed in log space.
    pub fn relative_difference(&self, other: &Self) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        if self.mantissa != other.mantissa {
            return f64::INFINITY;
        }
        (self.log_scale - other.log_scale).exp_m1().abs()
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self {
            mantissa: self.mantissa * rhs.mantissa,
            log_scale: self.log_scale + rhs.log_scale,
        }
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> Self {
        Self {
            mantissa: -self.mantissa,
            log_scale: self.log_scale,
        }
    }
}

impl From<f64> for ScaledValue {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalisation() {
        let v = ScaledValue::new(-0.25, 3.0);
        assert_eq!(v.mantissa(), -1.0);
        assert!((v.log_scale() - (3.0 + 0.25f64.ln())).abs() < 1e-15);
        assert_eq!(ScaledValue::new(0.0, 5.0), ScaledValue::ZERO);
        assert_eq!(ScaledValue::from_f64(0.0).value(), 0.0);
    }

    #[test]
    fn huge_values_do_not_overflow() {
        let a = ScaledValue::from_ln(1.0, 2000.0);
        let b = ScaledValue::from_ln(-1.0, 1999.0);
        let s = a.add(b);
        assert!((s.ln_abs() - (2000.0 + (1.0 - (-1f64).exp()).ln())).abs() < 1e-12);
        assert!((s.value_shifted(2000.0) - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!((a * b.recip()).value() + 1f64.exp() < 1e-12);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            let (sx, sy) = (ScaledValue::from_f64(x), ScaledValue::from_f64(y));
            prop_assert!((sx.value() - x).abs() <= 1e-14 * x.abs());
            prop_assert!(((sx * sy).value() - x * y).abs() <= 1e-13 * (x * y).abs());
            let sum = sx.add(sy).value();
            prop_assert!((sum - (x + y)).abs() <= 1e-9 * (x.abs() + y.abs()));
        }
    }
}
