//! Independent checks of the saddle-point machinery and of the solver.
//!
//! Derivatives are nested central differences with Richardson extrapolation.
//! The complex Fourier coordinates v of the saddle-point expansion are handled
//! through a real chart: with k_{j,α} = Σ_l W_{jl} v_{l,α}, a derivative along
//! v_{l,α} is the directional derivative along the complex vector W_{·l} in
//! the α components, so every v-derivative is a contraction of the real
//! derivative tensor of f (or g) in the 2r variables (k_{0,x}, k_{0,y}, …)
//! with columns of W. Pairs (v_l, v_{r−l}) are complex conjugate, hence
//! f_{l,r−l} = D²f[Re w_l, Re w_l] + D²f[Im w_l, Im w_l] is real.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    f_function, g_function, hessian_eigenvalues, polarization_sum, rho_step, saddle_coefficients,
    SaddleCoefficients, SaddleFrame, WaveVector,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, HalfLineMap};
use crate::reflection::{KernelKind, RotationCoefficients, RoundTripKernel};
use crate::spectral::Geometry;

/// Central-difference stencil with Richardson extrapolation in h².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeStencil {
    pub order: usize,
    pub step: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
    pub step: f64,
}

/// Scalar function of a real vector.
pub type Field<'a> = &'a dyn Fn(&[f64]) -> f64;

impl DerivativeStencil {
    pub fn new(order: usize, step: f64, levels: usize) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::Stencil(format!("order must be 1..=4, got {order}")));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Stencil(format!("step must be > 0, got {step}")));
        }
        if levels < 1 || (order >= 3 && levels < 2) {
            return Err(Error::Stencil(format!(
                "order {order} needs at least {} Richardson levels",
                if order >= 3 { 2 } else { 1 }
            )));
        }
        Ok(Self {
            order,
            step,
            levels,
        })
    }

    /// Nested central difference Π_i (f(x + h d_i) − f(x − h d_i))/(2h).
    fn raw(f: Field, x: &[f64], dirs: &[&[f64]], h: f64) -> f64 {
        let n = dirs.len();
        let mut y = vec![0.0; x.len()];
        let mut sum = 0.0;
        for mask in 0..(1usize << n) {
            y.copy_from_slice(x);
            let mut sign = 1.0;
            for (i, d) in dirs.iter().enumerate() {
                let s = if (mask >> i) & 1 == 1 {
                    sign = -sign;
                    -h
                } else {
                    h
                };
                for (yk, dk) in y.iter_mut().zip(d.iter()) {
                    *yk += s * dk;
                }
            }
            sum += sign * f(&y);
        }
        sum / (2.0 * h).powi(n as i32)
    }

    /// Mixed derivative along `dirs` starting from step `h`, halving per level.
    pub fn at_step(&self, f: Field, x: &[f64], dirs: &[&[f64]], h: f64) -> Result<Derivative> {
        if dirs.len() != self.order {
            return Err(Error::Stencil(format!(
                "stencil of order {} given {} directions",
                self.order,
                dirs.len()
            )));
        }
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(self.levels + 1);
        for k in 0..=self.levels {
            let hk = h / f64::powi(2.0, k as i32);
            let mut row = vec![Self::raw(f, x, dirs, hk)];
            for j in 1..=k {
                let p = f64::powi(4.0, j as i32);
                let prev = &table[k - 1];
                row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / (p - 1.0));
            }
            table.push(row);
        }
        let last = &table[self.levels];
        let best = last[self.levels];
        let error = (best - last[self.levels - 1])
            .abs()
            .max((best - table[self.levels - 1][self.levels - 1]).abs());
        Ok(Derivative {
            value: best,
            error,
            step: h,
        })
    }

    /// Tries starting steps over `decades` decades below `self.step` (four
    /// per decade) and keeps the estimate with the smallest error.
    pub fn sweep(&self, f: Field, x: &[f64], dirs: &[&[f64]], decades: f64) -> Result<Derivative> {
        let n = (4.0 * decades).round().max(0.0) as usize;
        let mut best: Option<Derivative> = None;
        for t in 0..=n {
            let h = self.step * 10f64.powf(-(t as f64) / 4.0);
            let d = self.at_step(f, x, dirs, h)?;
            if d.value.is_finite() && best.is_none_or(|b| d.error < b.error) {
                best = Some(d);
            }
        }
        best.ok_or_else(|| Error::Stencil("no finite estimate over the step sweep".into()))
    }
}

/// W_{jl} = r^{−1/2} exp(2πi jl/r).
pub fn w_transform(r: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (r as f64).sqrt();
    DMatrix::from_fn(r, r, |j, l| {
        Complex64::from_polar(s, 2.0 * PI * (j * l) as f64 / r as f64)
    })
}

/// Fully symmetric derivative tensor of order 1..=4 in n real variables.
#[derive(Debug, Clone)]
pub struct DerivativeTensor {
    pub n: usize,
    pub order: usize,
    data: Vec<f64>,
    /// largest Richardson error estimate among the entries
    pub max_error: f64,
}

impl DerivativeTensor {
    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat(idx)]
    }

    /// All derivatives of `f` of the given order at x, one sweep per
    /// independent entry.
    pub fn compute(f: Field, x: &[f64], order: usize, step: f64) -> Result<Self> {
        let n = x.len();
        let stencil = DerivativeStencil::new(order, step, 4)?;
        let mut t = Self {
            n,
            order,
            data: vec![0.0; n.pow(order as u32)],
            max_error: 0.0,
        };
        let unit: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut idx = vec![0usize; order];
        loop {
            let dirs: Vec<&[f64]> = idx.iter().map(|&i| unit[i].as_slice()).collect();
            let d = stencil.sweep(f, x, &dirs, 1.0)?;
            t.max_error = t.max_error.max(d.error);
            for perm in permutations(&idx) {
                let k = t.flat(&perm);
                t.data[k] = d.value;
            }
            // next non-decreasing index tuple
            let mut pos = order;
            loop {
                if pos == 0 {
                    return Ok(t);
                }
                pos -= 1;
                if idx[pos] + 1 < n {
                    idx[pos] += 1;
                    for q in pos + 1..order {
                        idx[q] = idx[pos];
                    }
                    break;
                }
            }
        }
    }

    /// Contraction with one complex column vector per slot.
    pub fn contract(&self, vecs: &[&[Complex64]]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        let n = self.n;
        let mut idx = vec![0usize; self.order];
        loop {
            let mut w = Complex64::new(1.0, 0.0);
            for (slot, &i) in idx.iter().enumerate() {
                w *= vecs[slot][i];
                if w == Complex64::new(0.0, 0.0) {
                    break;
                }
            }
            if w != Complex64::new(0.0, 0.0) {
                total += w * self.get(&idx);
            }
            let mut pos = self.order;
            loop {
                if pos == 0 {
                    return total;
                }
                pos -= 1;
                if idx[pos] + 1 < n {
                    idx[pos] += 1;
                    for q in idx.iter_mut().skip(pos + 1) {
                        *q = 0;
                    }
                    break;
                }
            }
        }
    }
}

fn permutations(idx: &[usize]) -> Vec<Vec<usize>> {
    if idx.len() <= 1 {
        return vec![idx.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..idx.len() {
        let mut rest = idx.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Real layout of the 2r variables: index 2j + α with α = 0 (x), 1 (y).
fn flatten(points: &[WaveVector]) -> Vec<f64> {
    points.iter().flat_map(|p| [p[0], p[1]]).collect()
}

fn unflatten(x: &[f64]) -> Vec<WaveVector> {
    x.chunks(2).map(|c| [c[0], c[1]]).collect()
}

/// The direction of v_{l,α} in the real variables.
fn v_direction(r: usize, l: usize, alpha: usize) -> Vec<Complex64> {
    let w = w_transform(r);
    let mut d = vec![Complex64::new(0.0, 0.0); 2 * r];
    for j in 0..r {
        d[2 * j + alpha] = w[(j, l)];
    }
    d
}

fn default_step(frame: &SaddleFrame) -> f64 {
    0.2 * frame.kappa_sp
}

/// Numerical Hessian of f at the points (2r × 2r, variables interleaved).
pub fn numeric_hessian(xi: f64, points: &[WaveVector], step: f64) -> Result<DMatrix<f64>> {
    let f = |x: &[f64]| f_function(xi, &unflatten(x));
    let t = DerivativeTensor::compute(&f, &flatten(points), 2, step)?;
    let n = 2 * points.len();
    Ok(DMatrix::from_fn(n, n, |i, j| t.get(&[i, j])))
}

/// Comparison of the numerical Hessian with the circulant structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianCheck {
    pub r: usize,
    /// max |H_αα − Γ_r/(2κ)| over both blocks, relative to 2/κ
    pub circulant_residual: f64,
    /// max |WᵀH_xxW − diag-on-counter-diagonal(λ)|, relative to 2/κ
    pub counter_diagonal_residual: f64,
    /// max |eig(H_xx) − λ_j| relative to 2/κ
    pub eigenvalue_residual: f64,
    /// largest H_xy entry relative to 2/κ
    pub xy_coupling: f64,
}

pub fn hessian_check(frame: &SaddleFrame) -> Result<HessianCheck> {
    let r = frame.r;
    let kap = frame.kappa_sp;
    let h = numeric_hessian(frame.xi, &frame.points(), default_step(frame))?;
    let scale = 2.0 / kap;
    let block = |a: usize, b: usize| DMatrix::from_fn(r, r, |i, j| h[(2 * i + a, 2 * j + b)]);
    let (hxx, hyy, hxy) = (block(0, 0), block(1, 1), block(0, 1));
    let gamma = DMatrix::from_fn(r, r, |i, j| {
        let mut v = 0.0;
        if i == j {
            v += 2.0;
        }
        if (i + 1) % r == j {
            v -= 1.0;
        }
        if (j + 1) % r == i {
            v -= 1.0;
        }
        v / (2.0 * kap)
    });
    let circ = if r == 1 {
        hxx.amax().max(hyy.amax())
    } else {
        (&hxx - &gamma).amax().max((&hyy - &gamma).amax())
    };
    let w = w_transform(r);
    let hc = hxx.map(|v| Complex64::new(v, 0.0));
    let whw = w.transpose() * hc * &w;
    let lam = hessian_eigenvalues(r, kap);
    let mut cd: f64 = 0.0;
    for j in 0..r {
        for l in 0..r {
            let expect = if (j + l) % r == 0 { lam[j] } else { 0.0 };
            cd = cd.max((whw[(j, l)] - Complex64::new(expect, 0.0)).norm());
        }
    }
    let mut eig: Vec<f64> = hxx
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    let mut lam_sorted = lam.clone();
    lam_sorted.sort_by(f64::total_cmp);
    let ev = eig
        .iter()
        .zip(&lam_sorted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(HessianCheck {
        r,
        circulant_residual: circ / scale,
        counter_diagonal_residual: cd / scale,
        eigenvalue_residual: ev / scale,
        xy_coupling: hxy.amax() / scale,
    })
}

/// Gradient of f by central differences.
pub fn numeric_gradient(xi: f64, points: &[WaveVector], step: f64) -> Result<Vec<f64>> {
    let f = |x: &[f64]| f_function(xi, &unflatten(x));
    let t = DerivativeTensor::compute(&f, &flatten(points), 1, step)?;
    Ok((0..t.n).map(|i| t.get(&[i])).collect())
}

/// Numerical reconstruction of D₁, D₂, D₃ and F₁ at a saddle point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericF1 {
    pub r: usize,
    pub xi: f64,
    pub kappa_sp: f64,
    pub gap: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3_over_g: f64,
    pub f1_over_g: f64,
    pub closed: SaddleCoefficients,
    /// g|sp at order 0 (both polarizations)
    pub g_sp: f64,
    /// largest Richardson error estimate of any tensor entry used
    pub max_error_estimate: f64,
}

impl NumericF1 {
    /// Relative deviations (D1, D2, D3/g, F1/g) from the closed forms. D1
    /// vanishes identically at r = 2, so each deviation is taken relative to
    /// max(|closed value|, |closed D2|).
    pub fn deviations(&self) -> [f64; 4] {
        let floor = self.closed.d2.abs();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(floor);
        [
            rel(self.d1, self.closed.d1),
            rel(self.d2, self.closed.d2),
            rel(self.d3_over_g, self.closed.d3_over_g),
            rel(self.f1_over_g, self.closed.f1_over_g),
        ]
    }
}

pub fn numeric_f1(frame: &SaddleFrame) -> Result<NumericF1> {
    let r = frame.r;
    if !(2..=6).contains(&r) {
        return Err(Error::Capability(format!(
            "numeric_F1 supports 2 <= r <= 6, got {r}"
        )));
    }
    let xi = frame.xi;
    let geometry = Geometry::new(1.0, frame.gap)?;
    let x0 = flatten(&frame.points());
    let step = default_step(frame);
    let f = |x: &[f64]| f_function(xi, &unflatten(x));
    let g = |x: &[f64]| g_function(xi, &unflatten(x), &geometry, 0).unwrap_or(f64::NAN);
    let t3 = DerivativeTensor::compute(&f, &x0, 3, step)?;
    let t4 = DerivativeTensor::compute(&f, &x0, 4, step)?;
    let t2g = DerivativeTensor::compute(&g, &x0, 2, step)?;
    let g_sp = g(&x0);
    let lam = hessian_eigenvalues(r, frame.kappa_sp);
    let dirs: Vec<Vec<Vec<Complex64>>> = (0..r)
        .map(|l| (0..2).map(|a| v_direction(r, l, a)).collect())
        .collect();
    let bar = |i: usize| (r - i) % r;

    let mut d1 = Complex64::new(0.0, 0.0);
    let mut d2 = Complex64::new(0.0, 0.0);
    let mut d3 = Complex64::new(0.0, 0.0);
    for i in 1..r {
        for a in 0..2 {
            d3 += t2g.contract(&[&dirs[i][a], &dirs[bar(i)][a]]) / lam[i];
            for j in 1..r {
                for b in 0..2 {
                    d2 += t4.contract(&[
                        &dirs[i][a],
                        &dirs[bar(i)][a],
                        &dirs[j][b],
                        &dirs[bar(j)][b],
                    ]) / (lam[i] * lam[j]);
                    for l in 1..r {
                        for c in 0..2 {
                            let lo = t3.contract(&[&dirs[i][a], &dirs[j][b], &dirs[l][c]]);
                            let hi = t3.contract(&[
                                &dirs[bar(i)][a],
                                &dirs[bar(j)][b],
                                &dirs[bar(l)][c],
                            ]);
                            d1 += lo * hi / (lam[i] * lam[j] * lam[l]);
                        }
                    }
                }
            }
        }
    }
    let d3_over_g = d3.re / g_sp;
    let f1_over_g = d1.re / 12.0 - d2.re / 8.0 + d3_over_g / 2.0;
    Ok(NumericF1 {
        r,
        xi,
        kappa_sp: frame.kappa_sp,
        gap: frame.gap,
        d1: d1.re,
        d2: d2.re,
        d3_over_g,
        f1_over_g,
        closed: saddle_coefficients(r, xi, frame.kappa_sp, frame.gap),
        g_sp,
        max_error_estimate: t3.max_error.max(t4.max_error).max(t2g.max_error),
    })
}

/// Largest |g_{i,α}| (i ≠ 0) at the saddle over ‖∇g‖ at a nearby point off
/// the manifold.
pub fn g_gradient_residual(frame: &SaddleFrame, order: u8) -> Result<f64> {
    let r = frame.r;
    let geometry = Geometry::new(50.0, frame.gap)?;
    let xi = frame.xi;
    let g = |x: &[f64]| g_function(xi, &unflatten(x), &geometry, order).unwrap_or(f64::NAN);
    let step = default_step(frame);
    let x0 = flatten(&frame.points());
    let t = DerivativeTensor::compute(&g, &x0, 1, step)?;
    let mut worst: f64 = 0.0;
    for i in 1..r {
        for a in 0..2 {
            worst = worst.max(t.contract(&[&v_direction(r, i, a)]).norm());
        }
    }
    let off = off_saddle(&frame.points(), frame.kappa_sp);
    let t_off = DerivativeTensor::compute(&g, &flatten(&off), 1, step)?;
    let scale = (0..t_off.n)
        .map(|i| t_off.get(&[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(worst / scale)
}

/// Deterministic displacement of each point by ~0.1κ.
fn off_saddle(points: &[WaveVector], kap: f64) -> Vec<WaveVector> {
    points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let t = 1.7 * j as f64 + 0.3;
            [p[0] + 0.1 * kap * t.cos(), p[1] + 0.1 * kap * t.sin()]
        })
        .collect()
}

/// Largest |f_{i j j̄}| (i ≠ 0, any components) relative to the largest
/// |f_{ijk}| over the v-indices.
pub fn f_ijj_residual(frame: &SaddleFrame) -> Result<f64> {
    let r = frame.r;
    let xi = frame.xi;
    let f = |x: &[f64]| f_function(xi, &unflatten(x));
    let t3 = DerivativeTensor::compute(&f, &flatten(&frame.points()), 3, default_step(frame))?;
    let dirs: Vec<Vec<Vec<Complex64>>> = (0..r)
        .map(|l| (0..2).map(|a| v_direction(r, l, a)).collect())
        .collect();
    let bar = |i: usize| (r - i) % r;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..r {
        for a in 0..2 {
            for j in 0..r {
                for b in 0..2 {
                    for l in 0..r {
                        for c in 0..2 {
                            let v = t3.contract(&[&dirs[i][a], &dirs[j][b], &dirs[l][c]]).norm();
                            scale = scale.max(v);
                            if i != 0 && l == bar(j) && c == b {
                                worst = worst.max(v);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Second derivatives of the polarization sum at the saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationMixing {
    pub r: usize,
    /// ∂²P/∂v_{i,α}∂v_{r−i,α} for i = 1..r−1, α = x, y (interleaved),
    /// P = Σ_p Π_j r_{p_j}ρ_{p_{j+1},p_j}
    pub second_derivative: Vec<f64>,
    /// −2 ∂_iΣχ ∂_{r−i}Σχ, the same quantity from first derivatives of the
    /// total tilt angle
    pub product_form: Vec<f64>,
    /// Σ_j Σ_l |∂_iχ_j||∂_{r−i}χ_l|: size of the individual terms
    pub term_scale: Vec<f64>,
    /// max |∂P/∂v_{i,α}| at the saddle
    pub first_derivative: f64,
    /// Σ_j χ_j at the saddle
    pub chi_sp: f64,
}

impl PolarizationMixing {
    /// max over i of |second derivative| and |difference| relative to the term scale.
    pub fn residual(&self) -> f64 {
        (0..self.second_derivative.len())
            .map(|i| {
                let s = self.term_scale[i].max(f64::MIN_POSITIVE);
                (self.second_derivative[i].abs() / s)
                    .max((self.second_derivative[i] - self.product_form[i]).abs() / s)
            })
            .fold(0.0, f64::max)
    }
}

fn tilt_angles(xi: f64, points: &[WaveVector]) -> Vec<f64> {
    let r = points.len();
    (0..r)
        .map(|j| {
            let (a, b) = (points[j], points[(j + 1) % r]);
            let (ka, kb) = (a[0].hypot(a[1]), b[0].hypot(b[1]));
            let d = b[1].atan2(b[0]) - a[1].atan2(a[0]);
            let rot = RotationCoefficients::from_kinematics(xi, ka, kb, d);
            rot.chi_in + rot.chi_out
        })
        .collect()
}

pub fn polarization_mixing_cancellation(frame: &SaddleFrame) -> Result<PolarizationMixing> {
    let r = frame.r;
    if !(2..=5).contains(&r) {
        return Err(Error::Capability(format!(
            "polarization oracle supports 2 <= r <= 5, got {r}"
        )));
    }
    if frame.k_sp() == 0.0 {
        return Err(Error::domain(
            "polarization_mixing_cancellation",
            "k_sp must be > 0",
        ));
    }
    let xi = frame.xi;
    let step = default_step(frame);
    let x0 = flatten(&frame.points());
    let p = |x: &[f64]| {
        let pts = unflatten(x);
        let rho: Vec<_> = (0..r)
            .map(|j| rho_step(xi, 1.0, &pts[j], &pts[(j + 1) % r], 0))
            .collect();
        polarization_sum(&rho)
    };
    let t2 = DerivativeTensor::compute(&p, &x0, 2, step)?;
    let t1 = DerivativeTensor::compute(&p, &x0, 1, step)?;
    let chi_tensors: Vec<DerivativeTensor> = (0..r)
        .map(|j| {
            let c = move |x: &[f64]| tilt_angles(xi, &unflatten(x))[j];
            DerivativeTensor::compute(&c, &x0, 1, step)
        })
        .collect::<Result<_>>()?;
    let mut second = Vec::new();
    let mut product = Vec::new();
    let mut scale = Vec::new();
    for i in 1..r {
        for a in 0..2 {
            let (di, dbar) = (v_direction(r, i, a), v_direction(r, (r - i) % r, a));
            second.push(t2.contract(&[&di, &dbar]).re);
            let gi: Vec<Complex64> = chi_tensors.iter().map(|t| t.contract(&[&di])).collect();
            let gb: Vec<Complex64> = chi_tensors.iter().map(|t| t.contract(&[&dbar])).collect();
            let si: Complex64 = gi.iter().sum();
            let sb: Complex64 = gb.iter().sum();
            product.push(-2.0 * (si * sb).re);
            let s: f64 = gi
                .iter()
                .map(|a| gb.iter().map(|b| a.norm() * b.norm()).sum::<f64>())
                .sum();
            scale.push(2.0 * s);
        }
    }
    let mut first: f64 = 0.0;
    for i in 1..r {
        for a in 0..2 {
            first = first.max(t1.contract(&[&v_direction(r, i, a)]).norm());
        }
    }
    Ok(PolarizationMixing {
        r,
        second_derivative: second,
        product_form: product,
        term_scale: scale,
        first_derivative: first,
        chi_sp: tilt_angles(xi, &frame.points()).iter().sum(),
    })
}

/// The three non-vanishing classes of d_pq and two vanishing ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpqClasses {
    /// (3/4) k_sp²/κ_sp⁶
    pub d: f64,
    pub ppp_qqq: f64,
    pub p1pp_qqq: f64,
    pub ppp_q1qq: f64,
    pub p1pp_q1qq: f64,
    pub p1pp_qq1q: f64,
    pub p1pp_qqq1: f64,
}

impl DpqClasses {
    /// Largest deviation from (d, −d/3, −d/3, d/3, 0, 0), relative to d.
    pub fn residual(&self) -> f64 {
        let d = self.d;
        [
            self.ppp_qqq - d,
            self.p1pp_qqq + d / 3.0,
            self.ppp_q1qq + d / 3.0,
            self.p1pp_q1qq - d / 3.0,
            self.p1pp_qq1q,
            self.p1pp_qqq1,
        ]
        .iter()
        .map(|v| v.abs() / d.abs())
        .fold(0.0, f64::max)
    }
}

/// Evaluates d_pq from numerical third derivatives of η on the saddle.
pub fn d_pq_classes(xi: f64, kappa_sp: f64) -> Result<DpqClasses> {
    let frame = SaddleFrame::new(2, xi, kappa_sp, 1.0)?;
    let k = frame.k_sp();
    let eta2 = |x: &[f64]| crate::asymptotics::eta(xi, &[x[0], x[1]], &[x[2], x[3]]);
    let t = DerivativeTensor::compute(&eta2, &[k, 0.0, k, 0.0], 3, default_step(&frame))?;
    // arguments are local indices: 0 = p (or q), 1 = p+1 (or q+1)
    let d_pq = |m: [usize; 3], n: [usize; 3]| {
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    s += t.get(&[2 * m[0] + a, 2 * m[1] + b, 2 * m[2] + c])
                        * t.get(&[2 * n[0] + a, 2 * n[1] + b, 2 * n[2] + c]);
                }
            }
        }
        s
    };
    Ok(DpqClasses {
        d: 0.75 * k * k / kappa_sp.powi(6),
        ppp_qqq: d_pq([0, 0, 0], [0, 0, 0]),
        p1pp_qqq: d_pq([1, 0, 0], [0, 0, 0]),
        ppp_q1qq: d_pq([0, 0, 0], [1, 0, 0]),
        p1pp_q1qq: d_pq([1, 0, 0], [1, 0, 0]),
        p1pp_qq1q: d_pq([1, 0, 0], [0, 1, 0]),
        p1pp_qqq1: d_pq([1, 0, 0], [0, 0, 1]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Kernel K[p_out][p_in](k_in, k_out, Δφ) as seen by the brute-force oracle.
pub type KernelFn<'a> = &'a (dyn Fn(f64, f64, f64) -> Result<[[f64; 2]; 2]> + Sync);

/// tr M^r for r ∈ {1, 2} by direct adaptive quadrature over the wave vectors,
/// with k mapped as in the solver and the common azimuth integrated out.
pub fn brute_force_trace(
    r: usize,
    xi: f64,
    geometry: &Geometry,
    kind: KernelKind,
    rel_tol: f64,
) -> Result<BruteForce> {
    let l = geometry.gap;
    // the exponential envelope e^{−2κL} is below 1e-25 past this k
    let k_max = 30.0 / l + xi;
    let kernel = RoundTripKernel::new(xi, geometry, kind, k_max)?;
    let eval = |ki: f64, ko: f64, d: f64| {
        if ki > k_max || ko > k_max {
            Ok([[0.0; 2]; 2])
        } else {
            kernel.eval(ki, ko, d)
        }
    };
    brute_force_trace_with(r, xi, geometry, &eval, rel_tol)
}

pub fn brute_force_trace_with(
    r: usize,
    xi: f64,
    geometry: &Geometry,
    kernel: KernelFn,
    rel_tol: f64,
) -> Result<BruteForce> {
    let l = geometry.gap;
    let map = HalfLineMap::QuadraticRational {
        scale: (1.0 + xi * l).sqrt() / l,
    };
    let abs_tol = 1e-300;
    let budget = 4000;
    let failure = std::cell::Cell::new(None::<Error>);
    let trap = |v: Result<[[f64; 2]; 2]>| match v {
        Ok(m) => Some(m),
        Err(e) => {
            failure.set(Some(e));
            None
        }
    };
    let result = match r {
        1 => {
            // tr M = ∫ k dk/(2π) Σ_p K_pp(k, k, 0)
            integrate(
                |t| {
                    if t >= 1.0 {
                        return 0.0;
                    }
                    let (k, jac) = map.apply(t);
                    trap(kernel(k, k, 0.0))
                        .map_or(0.0, |m| (m[0][0] + m[1][1]) * k * jac / (2.0 * PI))
                },
                0.0,
                1.0,
                rel_tol,
                abs_tol,
                budget,
            )
        }
        2 => {
            // tr M² = ∫ k₁dk₁ k₂dk₂ dΔ/(2π)³ Σ_{pq} K_qp(k₁→k₂, Δ) K_pq(k₂→k₁, −Δ)
            let inner_tol = 0.1 * rel_tol;
            let mut evaluations = 0usize;
            let outer = integrate(
                |t1| {
                    if t1 >= 1.0 {
                        return 0.0;
                    }
                    let (k1, j1) = map.apply(t1);
                    let mid = integrate(
                        |t2| {
                            if t2 >= 1.0 {
                                return 0.0;
                            }
                            let (k2, j2) = map.apply(t2);
                            let ang = integrate(
                                |d| {
                                    let (a, b) =
                                        match (trap(kernel(k1, k2, d)), trap(kernel(k2, k1, -d))) {
                                            (Some(a), Some(b)) => (a, b),
                                            _ => return 0.0,
                                        };
                                    let mut s = 0.0;
                                    for p in 0..2 {
                                        for q in 0..2 {
                                            s += a[q][p] * b[p][q];
                                        }
                                    }
                                    s
                                },
                                -PI,
                                PI,
                                inner_tol,
                                abs_tol,
                                budget,
                            );
                            match ang {
                                Ok(v) => {
                                    evaluations += v.evaluations;
                                    v.value * k2 * j2
                                }
                                Err(e) => {
                                    failure.set(Some(e));
                                    0.0
                                }
                            }
                        },
                        0.0,
                        1.0,
                        inner_tol,
                        abs_tol,
                        budget,
                    );
                    match mid {
                        Ok(v) => v.value * k1 * j1 / (2.0 * PI).powi(3),
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                },
                0.0,
                1.0,
                rel_tol,
                abs_tol,
                budget,
            );
            outer.map(|mut o| {
                o.evaluations += evaluations;
                o
            })
        }
        _ => {
            return Err(Error::Capability(format!(
                "brute-force trace supports r = 1, 2, got {r}"
            )));
        }
    }?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(BruteForce {
        value: result.value,
        error: result.error,
        evaluations: result.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub model: FitModel,
    /// slope of ratio − 1 in L/R at L/R → 0
    pub beta: f64,
    pub stderr: f64,
    /// all fitted coefficients, lowest power of L/R first
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    pub samples: usize,
}

/// Least-squares fit of ratio − 1 = β·(L/R) [+ γ·(L/R)²] to (R/L, ratio) samples.
pub fn beta_fit(samples: &[(f64, f64)], model: FitModel) -> Result<BetaFit> {
    let p = match model {
        FitModel::Linear => 1,
        FitModel::Quadratic => 2,
    };
    if samples.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|&(q, y)| !(q > 0.0) || !q.is_finite() || !y.is_finite())
    {
        return Err(Error::domain(
            "beta_fit",
            "samples must have finite ratio and R/L > 0",
        ));
    }
    let mut ratios: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    if ratios.len() < p.max(2) || ratios.len() < samples.len() {
        return Err(Error::RankDeficient("R/L values must be distinct".into()));
    }
    let n = samples.len();
    let a = DMatrix::from_fn(n, p, |i, j| (1.0 / samples[i].0).powi(j as i32 + 1));
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1 - 1.0));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::RankDeficient(format!(
            "condition number {:.3e}",
            smax / smin
        )));
    }
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let resid = &y - &a * &coef;
    let rss = resid.norm_squared();
    let dof = n - p;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let cov = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal matrix is singular".into()))?;
    Ok(BetaFit {
        model,
        beta: coef[0],
        stderr: (sigma2 * cov[(0, 0)]).sqrt(),
        coefficients: coef.iter().copied().collect(),
        residual_rms: (rss / n as f64).sqrt(),
        samples: n,
    })
}

/// One line of the oracle report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub r: usize,
    pub xi: f64,
    pub kappa_sp: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
    pub pass: bool,
}

/// The (ξ, κ_sp) points used by the suite, L = 1.
pub fn oracle_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::new();
    for &xi in &[0.4, 1.0, 2.5] {
        for &m in &[1.25, 2.0, 3.5] {
            g.push((xi, m * xi));
        }
    }
    g
}

/// Runs the derivative oracles over `rs` × `oracle_grid()`.
pub fn verify_suite(rs: &[usize]) -> Result<OracleReport> {
    let mut checks = Vec::new();
    let mut push = |name: &str, r: usize, xi: f64, kap: f64, residual: f64, tolerance: f64| {
        checks.push(OracleCheck {
            name: name.into(),
            r,
            xi,
            kappa_sp: kap,
            residual,
            tolerance,
            pass: residual < tolerance,
        });
    };
    for &r in rs {
        for (xi, kap) in oracle_grid() {
            let frame = SaddleFrame::new(r, xi, kap, 1.0)?;
            let n = numeric_f1(&frame)?;
            let dev = n.deviations();
            for (name, v) in ["D1", "D2", "D3", "F1"].iter().zip(dev) {
                push(name, r, xi, kap, v, 1e-5);
            }
            push("g_i", r, xi, kap, g_gradient_residual(&frame, 0)?, 1e-7);
            push("f_ijj", r, xi, kap, f_ijj_residual(&frame)?, 1e-7);
            push(
                "polarization_mixing",
                r,
                xi,
                kap,
                polarization_mixing_cancellation(&frame)?.residual(),
                1e-7,
            );
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(OracleReport { checks, pass })
}
