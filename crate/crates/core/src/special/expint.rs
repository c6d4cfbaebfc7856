use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E₁(u) = ∫_u^∞ e^{−t}/t dt.
pub fn exp_integral_e1(u: f64) -> Result<f64> {
    if u > 1.0 {
        Ok(exp_integral_e1_scaled(u)? * (-u).exp())
    } else {
        check(u)?;
        Ok(series(u))
    }
}

/// e^{u} E₁(u), useful where E₁ alone would underflow.
pub fn exp_integral_e1_scaled(u: f64) -> Result<f64> {
    check(u)?;
    if u <= 1.0 {
        return Ok(series(u) * u.exp());
    }
    // Continued fraction 1/(u + 1 − 1/(u + 3 − 4/(u + 5 − ...))), modified Lentz.
    const TINY: f64 = 1e-300;
    let mut b = u + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::domain(
        "exp_integral_e1",
        format!("continued fraction failed at u = {u}"),
    ))
}

fn check(u: f64) -> Result<()> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(
            "exp_integral_e1",
            format!("u must be > 0, got {u}"),
        ));
    }
    Ok(())
}

/// −γ − ln u − Σ_{k≥1} (−u)^k/(k·k!), for 0 < u ≤ 1.
fn series(u: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        term *= -u / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - u.ln() - sum
}
