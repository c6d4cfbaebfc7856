//! One-dimensional quadrature rules: Gauss–Legendre with the rational maps used
//! by the solver, and an adaptive Gauss–Kronrod integrator for the oracles.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut z = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule on (0, 1).
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Maps t ∈ (0, 1) onto (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfLineMap {
    /// x = s·t/(1−t)
    Rational { scale: f64 },
    /// x = s·t²/(1−t); node spacing grows like √x near the origin.
    QuadraticRational { scale: f64 },
}

impl HalfLineMap {
    pub fn scale(&self) -> f64 {
        match *self {
            HalfLineMap::Rational { scale } | HalfLineMap::QuadraticRational { scale } => scale,
        }
    }

    /// (x, dx/dt)
    pub fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            HalfLineMap::Rational { scale } => {
                let u = 1.0 - t;
                (scale * t / u, scale / (u * u))
            }
            HalfLineMap::QuadraticRational { scale } => {
                let u = 1.0 - t;
                (scale * t * t / u, scale * t * (2.0 - t) / (u * u))
            }
        }
    }

    /// Nodes and weights of an n-point rule on (0, ∞).
    pub fn rule(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (t, w) = gauss_legendre_unit(n);
        t.iter()
            .zip(&w)
            .map(|(&t, &w)| {
                let (x, j) = self.apply(t);
                (x, w * j)
            })
            .unzip()
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS_K[7];
    let mut g = fc * GK_WEIGHTS_G[3];
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS_K[j] * s;
        if j % 2 == 1 {
            g += GK_WEIGHTS_G[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss–Kronrod (7/15) on [a, b] with a global error target
/// max(abs_tol, rel_tol·|I|). Fails with `Error::Budget` after `max_intervals`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    let mut intervals = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    let mut evaluations = 15;
    loop {
        let value: f64 = intervals.iter().map(|i| i.2).sum();
        let error: f64 = intervals.iter().map(|i| i.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Budget {
                estimate: value,
                error,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// ∫_a^∞ f via x = a + s·t/(1−t) and adaptive Gauss–Kronrod on t ∈ (0, 1).
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral> {
    let map = HalfLineMap::Rational { scale };
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let (x, j) = map.apply(t);
            let v = f(a + x);
            if v == 0.0 {
                0.0
            } else {
                v * j
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
        2000,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1usize, 2, 5, 16, 61, 200] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n).min(40) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn half_line_maps() {
        for map in [
            HalfLineMap::Rational { scale: 0.7 },
            HalfLineMap::QuadraticRational { scale: 2.0 },
        ] {
            let (x, w) = map.rule(120);
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
            assert!((q - 1.0).abs() < 1e-10, "{map:?} {q}");
        }
    }

    #[test]
    fn adaptive_integration() {
        let r = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12, 0.0, 500).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
        let r = integrate_to_infinity(|x| (-x).exp() / x, 1.0, 1.0, 1e-13, 0.0).unwrap();
        assert!((r.value - 0.219_383_934_395_520_27).abs() < 1e-12);
        assert!(matches!(
            integrate(|x| 1.0 / x, 1e-300, 1.0, 1e-14, 0.0, 3),
            Err(Error::Budget { .. })
        ));
    }
}
