//! Large-R/L asymptotics of the round-trip traces and the energy.
//!
//! For r round trips the trace is a 2r-dimensional integral with phase
//! R·f(k_0..k_{r−1}) and prefactor g. The phase vanishes on the specular
//! manifold k_0 = … = k_{r−1}; expanding around it gives
//!
//! ```text
//! tr M^r = (R/2r) ∫_ξ^∞ dκ κ^r [F0 + F1/R + o(1/R)],   F0 = g|sp
//! ```
//!
//! Lengths are in units of L where a result is quoted "per L", energies in ħc/L.

use std::f64::consts::PI;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mie::diffraction_coefficients;
use crate::quadrature::integrate_to_infinity;
use crate::reflection::{rho_table, RotationCoefficients};
use crate::special::exp_integral_e1;
use crate::spectral::{kappa, Geometry, Polarization};

/// Transverse wave vector (k_x, k_y).
pub type WaveVector = [f64; 2];

/// −π³R/(720L²) in units of ħc/L.
pub fn e_pfa(geometry: &Geometry) -> f64 {
    -PI.powi(3) * geometry.aspect_ratio() / 720.0
}

/// Point on the specular manifold for r round trips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleFrame {
    pub r: usize,
    pub kappa_sp: f64,
    pub xi: f64,
    pub gap: f64,
}

impl SaddleFrame {
    pub fn new(r: usize, xi: f64, kappa_sp: f64, gap: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::domain("SaddleFrame", "r must be >= 1"));
        }
        if !(xi >= 0.0) || !(kappa_sp >= xi) || !(gap > 0.0) {
            return Err(Error::domain(
                "SaddleFrame",
                format!("need 0 <= xi <= kappa_sp and L > 0 (xi = {xi}, kappa_sp = {kappa_sp})"),
            ));
        }
        Ok(Self {
            r,
            kappa_sp,
            xi,
            gap,
        })
    }

    pub fn k_sp(&self) -> f64 {
        (self.kappa_sp * self.kappa_sp - self.xi * self.xi)
            .max(0.0)
            .sqrt()
    }

    /// u = 2ξLr
    pub fn u(&self) -> f64 {
        2.0 * self.xi * self.gap * self.r as f64
    }

    /// r copies of the saddle wave vector, taken along x.
    pub fn points(&self) -> Vec<WaveVector> {
        vec![[self.k_sp(), 0.0]; self.r]
    }
}

fn norm(k: &WaveVector) -> f64 {
    k[0].hypot(k[1])
}

/// η_{j,j+1} = κ_j + κ_{j+1} − sqrt(2(ξ² + κ_jκ_{j+1} + k_j·k_{j+1})).
pub fn eta(xi: f64, k_j: &WaveVector, k_j1: &WaveVector) -> f64 {
    let a = kappa(xi, norm(k_j));
    let b = kappa(xi, norm(k_j1));
    let dot = k_j[0] * k_j1[0] + k_j[1] * k_j1[1];
    a + b - (2.0 * (xi * xi + a * b + dot)).sqrt()
}

/// f = Σ_j η_{j,j+1}, cyclic in j.
pub fn f_function(xi: f64, points: &[WaveVector]) -> f64 {
    let r = points.len();
    (0..r)
        .map(|j| eta(xi, &points[j], &points[(j + 1) % r]))
        .sum()
}

/// Largest r for which `g_function` enumerates polarization assignments.
pub const MAX_POLARIZATION_ENUMERATION: usize = 12;

/// 2×2 reflection factor ρ for the scattering k_j → k_{j+1}, indexed
/// [out][in] with TM = 0, TE = 1.
pub fn rho_step(
    xi: f64,
    radius: f64,
    k_in: &WaveVector,
    k_out: &WaveVector,
    order: u8,
) -> [[f64; 2]; 2] {
    let (ki, ko) = (norm(k_in), norm(k_out));
    let dphi = k_out[1].atan2(k_out[0]) - k_in[1].atan2(k_in[0]);
    let rot = RotationCoefficients::from_kinematics(xi, ki, ko, dphi);
    let cos_theta =
        -(kappa(xi, ki) * kappa(xi, ko) + k_in[0] * k_out[0] + k_in[1] * k_out[1]) / (xi * xi);
    let (sp, sa) = diffraction_coefficients(xi, cos_theta);
    rho_table(&rot, sp, sa, radius, order)
}

/// g = Σ_{p_0..p_{r−1}} Π_j (−1)^{p_j} e^{−2κ_jL}/κ_j · ρ_{p_{j+1},p_j}.
///
/// The polarization sum runs over all 2^r assignments explicitly.
pub fn g_function(xi: f64, points: &[WaveVector], geometry: &Geometry, order: u8) -> Result<f64> {
    let r = points.len();
    if r == 0 {
        return Err(Error::domain("g_function", "need at least one point"));
    }
    if r > MAX_POLARIZATION_ENUMERATION {
        return Err(Error::Capability(format!(
            "explicit polarization sum limited to r <= {MAX_POLARIZATION_ENUMERATION}, got {r}"
        )));
    }
    if order > 1 {
        return Err(Error::domain(
            "g_function",
            format!("order must be 0 or 1, got {order}"),
        ));
    }
    let mut weight = 1.0;
    let mut rho = Vec::with_capacity(r);
    for j in 0..r {
        let kap = kappa(xi, norm(&points[j]));
        weight *= (-2.0 * kap * geometry.gap).exp() / kap;
        rho.push(rho_step(
            xi,
            geometry.radius,
            &points[j],
            &points[(j + 1) % r],
            order,
        ));
    }
    Ok(weight * polarization_sum(&rho))
}

/// Σ_p Π_j r_{p_j} ρ_j[p_{j+1}][p_j] with r_TM = 1, r_TE = −1.
pub fn polarization_sum(rho: &[[[f64; 2]; 2]]) -> f64 {
    let r = rho.len();
    let fresnel = [1.0, -1.0];
    let mut total = 0.0;
    for mask in 0..(1usize << r) {
        let p = |j: usize| (mask >> (j % r)) & 1;
        let mut term = 1.0;
        for (j, rj) in rho.iter().enumerate() {
            term *= fresnel[p(j)] * rj[p(j + 1)][p(j)];
        }
        total += term;
    }
    total
}

/// λ_j = (2/κ_sp) sin²(πj/r), j = 0..r−1; λ_0 = 0 is the manifold direction.
pub fn hessian_eigenvalues(r: usize, kappa_sp: f64) -> Vec<f64> {
    (0..r)
        .map(|j| {
            let s = (PI * j as f64 / r as f64).sin();
            if j == 0 {
                0.0
            } else {
                2.0 / kappa_sp * s * s
            }
        })
        .collect()
}

/// a(s) = (κ_sp/6r)(r² − 6sr + 6s² − 1), continued r-periodically.
pub fn a_function(s: f64, r: usize, kappa_sp: f64) -> f64 {
    let rf = r as f64;
    let s = s.rem_euclid(rf);
    kappa_sp / (6.0 * rf) * (rf * rf - 6.0 * s * rf + 6.0 * s * s - 1.0)
}

/// Closed forms of the NTLO building blocks; D₃ and F₁ are given per unit g|sp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleCoefficients {
    pub d1: f64,
    pub d2: f64,
    pub d3_over_g: f64,
    pub f1_over_g: f64,
}

pub fn saddle_coefficients(r: usize, xi: f64, kappa_sp: f64, gap: f64) -> SaddleCoefficients {
    let rf = r as f64;
    let (k2, x2) = (kappa_sp * kappa_sp, xi * xi);
    let k3 = k2 * kappa_sp;
    let rm1 = rf - 1.0;
    SaddleCoefficients {
        d1: (rf - 2.0) * rm1 * rm1 * (k2 - x2) / (rf * k3),
        d2: 2.0 * rm1 * rm1 * ((rf - 2.0) * k2 - 3.0 * rf * x2) / (3.0 * rf * k3),
        d3_over_g: -(rf * rf - 1.0) * (x2 + gap * kappa_sp * (k2 + x2)) / (3.0 * k3),
        f1_over_g: -(rf * rf - 1.0) * (rf * gap * kappa_sp * (k2 + x2) + x2) / (6.0 * rf * k3),
    }
}

/// s_TE|sp and s_TM|sp.
pub fn saddle_diffraction(xi: f64, kappa_sp: f64, pol: Polarization) -> f64 {
    let k3 = kappa_sp.powi(3);
    match pol {
        Polarization::TE => (0.5 * xi * xi - kappa_sp * kappa_sp) / k3,
        Polarization::TM => -0.5 * xi * xi / k3,
    }
}

/// Trace contribution split as (R/L)·coefficient + constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingTrace {
    pub ratio_coefficient: f64,
    pub constant: f64,
}

impl LeadingTrace {
    pub fn at(&self, aspect_ratio: f64) -> f64 {
        aspect_ratio * self.ratio_coefficient + self.constant
    }
}

/// Leading saddle-point trace per polarization at u = 2ξLr.
pub fn trace_mr_leading(r: usize, u: f64, pol: Polarization) -> Result<LeadingTrace> {
    if r == 0 {
        return Err(Error::domain("trace_Mr_leading", "r must be >= 1"));
    }
    if !(u > 0.0) {
        return Err(Error::domain(
            "trace_Mr_leading",
            format!("u must be > 0, got {u}"),
        ));
    }
    let rf = r as f64;
    let e = (-u).exp();
    let e1 = exp_integral_e1(u)?;
    let constant = match pol {
        Polarization::TE => 0.125 * ((u * u - 4.0) * e1 - (u - 1.0) * e),
        Polarization::TM => -0.125 * (u * u * e1 - (u - 1.0) * e),
    };
    Ok(LeadingTrace {
        ratio_coefficient: e / (4.0 * rf * rf),
        constant,
    })
}

/// NTLO trace −(r²−1)e^{−u}/(12r²), the same for each polarization.
pub fn trace_mr_ntlo(r: usize, u: f64) -> Result<f64> {
    if r == 0 || !(u >= 0.0) {
        return Err(Error::domain("trace_Mr_ntlo", "need r >= 1 and u >= 0"));
    }
    let rf = r as f64;
    Ok(-(rf * rf - 1.0) * (-u).exp() / (12.0 * rf * rf))
}

const KAPPA_REL_TOL: f64 = 1e-13;

/// The leading trace by quadrature over κ_sp of g_p|sp (L = 1).
pub fn trace_mr_leading_numeric(r: usize, u: f64, pol: Polarization) -> Result<LeadingTrace> {
    if r == 0 || !(u > 0.0) {
        return Err(Error::domain("trace_Mr_leading", "need r >= 1 and u > 0"));
    }
    let rf = r as f64;
    let xi = u / (2.0 * rf);
    let a = 2.0 * rf;
    let scale = 1.0 / a;
    // (R/2r)∫dκ e^{−2κr}(1 + r s_p/R)
    let lead = integrate_to_infinity(|k| (-a * k).exp(), xi, scale, KAPPA_REL_TOL, 0.0)?;
    let corr = integrate_to_infinity(
        |k| (-a * k).exp() * saddle_diffraction(xi, k, pol),
        xi,
        scale,
        KAPPA_REL_TOL,
        0.0,
    )?;
    Ok(LeadingTrace {
        ratio_coefficient: lead.value / (2.0 * rf),
        constant: 0.5 * corr.value,
    })
}

/// The NTLO trace by quadrature over κ_sp of F₁ (L = 1, one polarization).
pub fn trace_mr_ntlo_numeric(r: usize, u: f64) -> Result<f64> {
    if r == 0 || !(u > 0.0) {
        return Err(Error::domain("trace_Mr_ntlo", "need r >= 1 and u > 0"));
    }
    let rf = r as f64;
    let xi = u / (2.0 * rf);
    let a = 2.0 * rf;
    let v = integrate_to_infinity(
        |k| (-a * k).exp() * saddle_coefficients(r, xi, k, 1.0).f1_over_g,
        xi,
        1.0 / a,
        KAPPA_REL_TOL,
        0.0,
    )?;
    Ok(v.value / (2.0 * rf))
}

/// β = rational + pi_inv2·π⁻², held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactBeta {
    pub rational: Rational64,
    pub pi_inv2: Rational64,
}

impl ExactBeta {
    pub fn new(rational: (i64, i64), pi_inv2: (i64, i64)) -> Self {
        Self {
            rational: Rational64::new(rational.0, rational.1),
            pi_inv2: Rational64::new(pi_inv2.0, pi_inv2.1),
        }
    }

    pub fn value(&self) -> f64 {
        let f = |q: Rational64| *q.numer() as f64 / *q.denom() as f64;
        f(self.rational) + f(self.pi_inv2) / (PI * PI)
    }

    pub fn symbolic(&self) -> String {
        let r = self.rational;
        let p = self.pi_inv2;
        let frac = |q: Rational64| {
            if *q.denom() == 1 {
                format!("{}", q.numer().abs())
            } else {
                format!("{}/{}", q.numer().abs(), q.denom())
            }
        };
        match (r == 0.into(), p == 0.into()) {
            (true, true) => "0".into(),
            (false, true) => format!("{}{}", if r < 0.into() { "-" } else { "" }, frac(r)),
            (true, false) => format!("{}{}/pi^2", if p < 0.into() { "-" } else { "" }, frac_pi(p)),
            (false, false) => format!(
                "{}{} {} {}/pi^2",
                if r < 0.into() { "-" } else { "" },
                frac(r),
                if p < 0.into() { "-" } else { "+" },
                frac_pi(p)
            ),
        }
    }
}

fn frac_pi(q: Rational64) -> String {
    if *q.denom() == 1 {
        format!("{}", q.numer().abs())
    } else {
        format!("({}/{})", q.numer().abs(), q.denom())
    }
}

impl std::ops::Add for ExactBeta {
    type Output = ExactBeta;
    fn add(self, o: ExactBeta) -> ExactBeta {
        ExactBeta {
            rational: self.rational + o.rational,
            pi_inv2: self.pi_inv2 + o.pi_inv2,
        }
    }
}

impl std::ops::Mul<Rational64> for ExactBeta {
    type Output = ExactBeta;
    fn mul(self, q: Rational64) -> ExactBeta {
        ExactBeta {
            rational: self.rational * q,
            pi_inv2: self.pi_inv2 * q,
        }
    }
}

impl Serialize for ExactBeta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ExactBeta", 2)?;
        st.serialize_field("exact", &self.symbolic())?;
        st.serialize_field("value", &self.value())?;
        st.end()
    }
}

/// The 1/R correction coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaBundle {
    pub beta_d_te: ExactBeta,
    pub beta_d_tm: ExactBeta,
    pub beta_d: ExactBeta,
    pub beta_go: ExactBeta,
    pub beta1: ExactBeta,
    pub beta_te: ExactBeta,
    pub beta_tm: ExactBeta,
    pub beta_dd: ExactBeta,
    pub beta_nn: ExactBeta,
    /// shares of β₁ in percent: diffraction TE, diffraction TM,
    /// geometric optics TE, geometric optics TM
    pub table_percentages: [f64; 4],
}

pub fn beta_bundle() -> BetaBundle {
    let beta_d_te = ExactBeta::new((0, 1), (-25, 2));
    let beta_d_tm = ExactBeta::new((0, 1), (-5, 2));
    let beta_d = beta_d_te + beta_d_tm;
    let beta_go = ExactBeta::new((1, 3), (-5, 1));
    let half = Rational64::new(1, 2);
    let beta_te = beta_d_te + beta_go * half;
    let beta_tm = beta_d_tm + beta_go * half;
    let beta1 = beta_d + beta_go;
    let b1 = beta1.value();
    let go_half = 0.5 * beta_go.value();
    BetaBundle {
        beta_d_te,
        beta_d_tm,
        beta_d,
        beta_go,
        beta1,
        beta_te,
        beta_tm,
        beta_dd: ExactBeta::new((1, 6), (0, 1)),
        beta_nn: ExactBeta::new((1, 6), (-20, 1)),
        table_percentages: [
            100.0 * beta_d_te.value() / b1,
            100.0 * beta_d_tm.value() / b1,
            100.0 * go_half / b1,
            100.0 * go_half / b1,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsymptoticOrder {
    Pfa,
    Ntlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEnergy {
    /// units of ħc/L
    pub energy: f64,
    pub ratio_to_pfa: f64,
    /// false once |β₁|L/R ≥ 1, where the truncated expansion is meaningless
    pub within_validity: bool,
}

pub fn energy_asymptotic(geometry: &Geometry, order: AsymptoticOrder) -> AsymptoticEnergy {
    let pfa = e_pfa(geometry);
    let ratio = match order {
        AsymptoticOrder::Pfa => 1.0,
        AsymptoticOrder::Ntlo => 1.0 + beta_bundle().beta1.value() / geometry.aspect_ratio(),
    };
    AsymptoticEnergy {
        energy: pfa * ratio,
        ratio_to_pfa: ratio,
        within_validity: ratio > 0.0,
    }
}

/// Σ_{r ≥ 1} t(r) from the terms up to r_max and a power-law tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MercatorSum {
    pub value: f64,
    pub partial: f64,
    pub tail: f64,
    pub tail_bound: f64,
    pub r_max: usize,
}

/// Sums t(1..=r_max) and adds Σ_{r > r_max} c·r^{−p}, with c and p fitted to
/// t(r_max/2) and t(r_max) and the sum done by Euler–Maclaurin. The bound
/// combines the spread against a fit at (r_max/4, r_max/2) with the first
/// omitted Euler–Maclaurin term.
pub fn mercator_sum<F: Fn(usize) -> f64>(term: F, r_max: usize) -> Result<MercatorSum> {
    if r_max < 8 {
        return Err(Error::domain("mercator_sum", "r_max must be >= 8"));
    }
    let mut partial = 0.0;
    let mut comp = 0.0;
    let mut values = vec![0.0; r_max + 1];
    // sum small terms first
    for r in (1..=r_max).rev() {
        let t = term(r);
        values[r] = t;
        let y = t - comp;
        let s = partial + y;
        comp = (s - partial) - y;
        partial = s;
    }
    let fit = |lo: usize, hi: usize| -> Option<(f64, f64)> {
        let (a, b) = (values[lo], values[hi]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            return None;
        }
        let p = (a / b).ln() / (hi as f64 / lo as f64).ln();
        Some((b * (hi as f64).powf(p), p))
    };
    let n = r_max;
    let (tail, tail_bound) = match (fit(n / 2, n), fit(n / 4, n / 2)) {
        (Some((c, p)), other) if p > 1.0 => {
            let t = euler_maclaurin_tail(c, p, n as f64);
            let spread = other
                .filter(|(_, q)| *q > 1.0)
                .map(|(c2, q)| (euler_maclaurin_tail(c2, q, n as f64) - t).abs())
                .unwrap_or(t.abs());
            let nf = n as f64;
            let em = (c * p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) / 30240.0
                * nf.powf(-p - 5.0))
            .abs();
            (t, spread + em)
        }
        _ if values[n] == 0.0 => (0.0, 0.0),
        _ => {
            return Err(Error::Stencil(
                "terms do not decay like a power r^-p with p > 1".into(),
            ))
        }
    };
    Ok(MercatorSum {
        value: partial + tail,
        partial,
        tail,
        tail_bound,
        r_max,
    })
}

/// Σ_{r > n} c·r^{−p} by Euler–Maclaurin.
fn euler_maclaurin_tail(c: f64, p: f64, n: f64) -> f64 {
    c * (n.powf(1.0 - p) / (p - 1.0) - 0.5 * n.powf(-p) + p / 12.0 * n.powf(-p - 1.0)
        - p * (p + 1.0) * (p + 2.0) / 720.0 * n.powf(-p - 3.0))
}

/// Energy coefficients reconstructed from per-r traces: E = −(1/2π)Σ_r (1/r)∫dξ tr M^r,
/// split as E/E_PFA = pfa_fraction + beta·L/R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceReconstruction {
    pub pfa_fraction: f64,
    pub beta: f64,
    pub pfa_fraction_tail_bound: f64,
    pub beta_tail_bound: f64,
}

const U_REL_TOL: f64 = 1e-12;

/// Per-polarization reconstruction of E_{p,0}/E_PFA = 1/2 + β_{d,p}L/R from
/// the leading traces.
pub fn reconstruct_leading(pol: Polarization, r_max: usize) -> Result<TraceReconstruction> {
    // ∫_0^∞ dξ tr(r, u = 2ξr) at L = 1, computed once per part in u
    let ratio_part = integrate_to_infinity(
        |u| {
            trace_mr_leading(1, u, pol)
                .map(|t| t.ratio_coefficient)
                .unwrap_or(0.0)
        },
        0.0,
        1.0,
        U_REL_TOL,
        0.0,
    )?
    .value;
    let const_part = integrate_to_infinity(
        |u| {
            trace_mr_leading(1, u, pol)
                .map(|t| t.constant)
                .unwrap_or(0.0)
        },
        0.0,
        1.0,
        U_REL_TOL,
        0.0,
    )?
    .value;
    // the R/L coefficient carries 1/r² (taken out at r = 1), dξ = du/(2r)
    let ratio_sum = mercator_sum(
        |r| ratio_part / (r as f64).powi(2) / (2.0 * r as f64) / r as f64,
        r_max,
    )?;
    let const_sum = mercator_sum(|r| const_part / (2.0 * r as f64) / r as f64, r_max)?;
    let pfa_unit = -PI.powi(3) / 720.0;
    let to_energy = -1.0 / (2.0 * PI);
    Ok(TraceReconstruction {
        pfa_fraction: to_energy * ratio_sum.value / pfa_unit,
        beta: to_energy * const_sum.value / pfa_unit,
        pfa_fraction_tail_bound: (to_energy * ratio_sum.tail_bound / pfa_unit).abs(),
        beta_tail_bound: (to_energy * const_sum.tail_bound / pfa_unit).abs(),
    })
}

/// β_go from the NTLO traces of both polarizations.
pub fn reconstruct_beta_go(r_max: usize) -> Result<TraceReconstruction> {
    let sum = mercator_sum(
        |r| {
            let integral = integrate_to_infinity(
                |u| 2.0 * trace_mr_ntlo(r, u).unwrap_or(0.0),
                0.0,
                1.0,
                U_REL_TOL,
                0.0,
            )
            .map(|i| i.value)
            .unwrap_or(f64::NAN);
            integral / (2.0 * r as f64) / r as f64
        },
        r_max,
    )?;
    if !sum.value.is_finite() {
        return Err(Error::Budget {
            estimate: sum.value,
            error: f64::INFINITY,
        });
    }
    let pfa_unit = -PI.powi(3) / 720.0;
    let to_energy = -1.0 / (2.0 * PI);
    Ok(TraceReconstruction {
        pfa_fraction: 0.0,
        beta: to_energy * sum.value / pfa_unit,
        pfa_fraction_tail_bound: 0.0,
        beta_tail_bound: (to_energy * sum.tail_bound / pfa_unit).abs(),
    })
}
