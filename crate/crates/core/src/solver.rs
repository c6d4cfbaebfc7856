//! Nyström evaluation of E = (ħ/2π) ∫dξ tr ln(1 − M).
//!
//! At fixed ξ the round-trip kernel depends on the azimuths only through
//! Δφ = φ_out − φ_in, so an FFT over Δφ splits M into blocks M_m, one per
//! azimuthal index. Polarization-diagonal kernels are even in Δφ and the
//! mixing kernels are odd; after the similarity diag(1, i) on the TE channels
//! every block is real symmetric of size 2·n_radial (TM rows first).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::asymptotics::e_pfa;
use crate::error::{Error, Result};
use crate::quadrature::HalfLineMap;
use crate::reflection::{KernelKind, RoundTripKernel};
use crate::spectral::{kappa, round_trip_phase, Geometry, UnitSystem};

/// Entries below this magnitude are treated as structural zeros.
const ENTRY_FLOOR: f64 = 1e-20;
/// Blocks whose largest entry is below this fraction of block 0 are dropped.
const M_CUTOFF: f64 = 1e-10;

/// Discretization knobs. Scales are in units of 1/L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub n_radial: usize,
    /// k = s·t²/(1−t) with s = radial_scale·sqrt(1 + ξL)/L
    pub radial_scale: f64,
    pub n_azimuthal: usize,
    pub n_xi: usize,
    /// ξ = xi_scale·t/(1−t)/L
    pub xi_scale: f64,
    /// Fixed azimuthal cutoff; `None` selects it per ξ from the block norms.
    pub m_max: Option<usize>,
    /// Common offset of all azimuth grids (the result must not depend on it).
    #[serde(default)]
    pub azimuth_origin: f64,
}

impl QuadratureConfig {
    /// Defaults resolved for a geometry.
    pub fn for_geometry(geometry: &Geometry) -> Self {
        let ratio = geometry.aspect_ratio();
        let n_radial = (36.0 + 5.5 * ratio.sqrt()).round() as usize;
        let m_est = m_max_estimate(ratio);
        let n_azimuthal = (((2.5 * m_est as f64) as usize).max(64)).next_power_of_two();
        Self {
            n_radial,
            radial_scale: 1.0,
            n_azimuthal,
            n_xi: 40,
            xi_scale: 0.5,
            m_max: None,
            azimuth_origin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 4 || self.n_azimuthal < 4 || self.n_xi < 4 {
            return Err(Error::Config("all node counts must be >= 4".into()));
        }
        if !self.n_azimuthal.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_azimuthal must be a power of two, got {}",
                self.n_azimuthal
            )));
        }
        if let Some(m) = self.m_max {
            if m > self.n_azimuthal / 2 {
                return Err(Error::Config(format!(
                    "m_max = {m} exceeds n_azimuthal/2 = {}",
                    self.n_azimuthal / 2
                )));
            }
        }
        if !(self.radial_scale > 0.0) || !(self.xi_scale > 0.0) {
            return Err(Error::Config("quadrature scales must be > 0".into()));
        }
        if !self.azimuth_origin.is_finite() {
            return Err(Error::Config("azimuth_origin must be finite".into()));
        }
        Ok(())
    }

    /// Copy with every node count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_radial: self.n_radial * factor,
            n_azimuthal: (self.n_azimuthal * factor).next_power_of_two(),
            n_xi: self.n_xi * factor,
            m_max: self.m_max.map(|m| m * factor),
            ..self.clone()
        }
    }
}

/// Azimuthal extent of the kernel at small ξ: the Δφ-width of e^{−Rη} is
/// sqrt(2κ/R)/k, so |m| ≲ 7.5·k·sqrt(R/2κ) for a 10⁻¹⁰ cutoff, with k up to
/// where e^{−2kL} ~ 10⁻¹⁴.
pub fn m_max_estimate(aspect_ratio: f64) -> usize {
    (7.5 * (8.0 * aspect_ratio).sqrt() + 8.0).ceil() as usize
}

/// One azimuthal block at fixed ξ.
///
/// Radial nodes below `first_radial` (and beyond the last node with a
/// non-negligible envelope) carry no entries at this m and are left out, so
/// `entries` has size 2·n with n = number of kept nodes: TM rows first, then
/// TE rows, both in ascending k.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub m: usize,
    pub xi: f64,
    pub first_radial: usize,
    pub entries: DMatrix<f64>,
}

impl BlockMatrix {
    /// max |M − Mᵀ| / max |M|
    pub fn symmetry_error(&self) -> f64 {
        let e = &self.entries;
        let scale = e.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (e - e.transpose()).amax() / scale
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let eig = self.entries.clone().symmetric_eigen();
        eig.eigenvalues.amax()
    }

    pub fn multiplicity(&self) -> f64 {
        if self.m == 0 {
            1.0
        } else {
            2.0
        }
    }
}

/// Radial nodes and weights at ξ.
pub fn radial_rule(
    xi: f64,
    geometry: &Geometry,
    config: &QuadratureConfig,
) -> (Vec<f64>, Vec<f64>) {
    let l = geometry.gap;
    let scale = config.radial_scale * (1.0 + xi * l).sqrt() / l;
    HalfLineMap::QuadraticRational { scale }.rule(config.n_radial)
}

/// ξ nodes and weights.
pub fn xi_rule(geometry: &Geometry, config: &QuadratureConfig) -> (Vec<f64>, Vec<f64>) {
    HalfLineMap::Rational {
        scale: config.xi_scale / geometry.gap,
    }
    .rule(config.n_xi)
}

/// Diagnostics from assembling the blocks at one ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub m_max: usize,
    /// max-norm of the last kept block over that of block 0
    pub m_tail: f64,
    /// largest weighted Fourier coefficient at m = n_azimuthal/2 relative to
    /// the largest at m = 0
    pub aliasing: f64,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
}

/// The azimuthal blocks M_m, m = 0..=m_max, at frequency ξ.
pub fn build_blocks(
    xi: f64,
    geometry: &Geometry,
    kind: KernelKind,
    config: &QuadratureConfig,
) -> Result<Vec<BlockMatrix>> {
    Ok(build_blocks_with_diagnostics(xi, geometry, kind, config)?.0)
}

pub fn build_blocks_with_diagnostics(
    xi: f64,
    geometry: &Geometry,
    kind: KernelKind,
    config: &QuadratureConfig,
) -> Result<(Vec<BlockMatrix>, BlockDiagnostics)> {
    config.validate()?;
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::domain(
            "build_blocks",
            format!("xi must be > 0, got {xi}"),
        ));
    }
    let n = config.n_radial;
    let n_phi = config.n_azimuthal;
    let (k, w) = radial_rule(xi, geometry, config);
    let radius = geometry.radius;
    let gap = geometry.gap;

    // log of the largest entry a node can take part in, up to the pair factor
    let node_log: Vec<f64> = (0..n)
        .map(|a| {
            let kap = kappa(xi, k[a]);
            0.5 * (k[a] * w[a] / kap).ln() - kap * gap
        })
        .collect();
    let ln_pref = (PI * radius).ln() - (2.0 * PI).ln();
    let ln_floor = ENTRY_FLOOR.ln();
    let n_kept = (0..n)
        .rev()
        .find(|&a| 2.0 * node_log[a] + ln_pref > ln_floor)
        .map_or(0, |a| a + 1);
    if n_kept == 0 {
        return Ok((
            vec![BlockMatrix {
                m: 0,
                xi,
                first_radial: 0,
                entries: DMatrix::zeros(0, 0),
            }],
            BlockDiagnostics {
                m_max: 0,
                m_tail: 0.0,
                aliasing: 0.0,
                pairs_evaluated: 0,
                pairs_skipped: n * (n + 1) / 2,
            },
        ));
    }

    // azimuthal extent per node, monotone in k
    let m_cap = config.m_max.unwrap_or(n_phi / 2);
    let mut extent = vec![0usize; n_kept];
    let mut run = 0usize;
    for a in 0..n_kept {
        let kap = kappa(xi, k[a]);
        let e = (8.0 * k[a] * (radius / (2.0 * kap)).sqrt() + 10.0).ceil() as usize;
        run = run.max(e.min(m_cap));
        extent[a] = if config.m_max.is_some() { m_cap } else { run };
    }
    let m_alloc = extent[n_kept - 1];

    let kernel = RoundTripKernel::new(xi, geometry, kind, k[n_kept - 1])?;
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_phi);
    let phi0 = config.azimuth_origin;
    let half = n_phi / 2;
    let coeff = 1.0 / (2.0 * PI * n_phi as f64);

    // per row a: for b ≥ a, the Fourier data (diag, mixing) for m ≤ extent[a]
    type RowData = Vec<(usize, Vec<Complex64>, Vec<Complex64>)>;
    let rows: Vec<Result<(RowData, (f64, f64), usize)>> = (0..n_kept)
        .into_par_iter()
        .map(|a| {
            let mut out = Vec::new();
            let mut alias: f64 = 0.0;
            let mut zero: f64 = 0.0;
            let mut skipped = 0;
            let mut diag = vec![Complex64::new(0.0, 0.0); n_phi];
            let mut mix = vec![Complex64::new(0.0, 0.0); n_phi];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for b in a..n_kept {
                let eta0 = round_trip_phase(xi, k[a], k[b], 0.0);
                if node_log[a] + node_log[b] + ln_pref - radius * eta0 < ln_floor {
                    skipped += 1;
                    continue;
                }
                for j in 0..=half {
                    // absolute azimuths; only their difference may matter
                    let phi_in = phi0;
                    let phi_out = phi0 + 2.0 * PI * j as f64 / n_phi as f64;
                    let kv = kernel.eval(k[a], k[b], phi_out - phi_in)?;
                    diag[j] = Complex64::new(kv[0][0], kv[1][1]);
                    mix[j] = Complex64::new(kv[0][1], kv[1][0]);
                    if j > 0 && j < half {
                        diag[n_phi - j] = diag[j];
                        mix[n_phi - j] = -mix[j];
                    }
                }
                mix[0] = Complex64::new(0.0, 0.0);
                mix[half] = Complex64::new(0.0, 0.0);
                fft.process_with_scratch(&mut diag, &mut scratch);
                fft.process_with_scratch(&mut mix, &mut scratch);
                let c = coeff * (k[a] * w[a] * k[b] * w[b]).sqrt();
                let amax = |z: Complex64| z.re.abs().max(z.im.abs());
                alias = alias.max(c * amax(diag[half]).max(amax(mix[half])));
                zero = zero.max(c * amax(diag[0]));
                let top = extent[a];
                let dm: Vec<Complex64> = diag[..=top].iter().map(|z| z * c).collect();
                let xm: Vec<Complex64> = mix[..=top].iter().map(|z| z * c).collect();
                out.push((b, dm, xm));
            }
            Ok((out, (alias, zero), skipped))
        })
        .collect();

    // block m holds the radial nodes a ≥ first[m]
    let first: Vec<usize> = (0..=m_alloc)
        .map(|m| extent.iter().position(|&e| e >= m).unwrap_or(n_kept))
        .collect();
    let mut blocks: Vec<DMatrix<f64>> = first
        .iter()
        .map(|&f| DMatrix::zeros(2 * (n_kept - f), 2 * (n_kept - f)))
        .collect();
    let (mut nyquist, mut zero): (f64, f64) = (0.0, 0.0);
    let mut pairs_skipped = (n - n_kept) * (n + n_kept + 1) / 2;
    let mut pairs_evaluated = 0;
    for (a, row) in rows.into_iter().enumerate() {
        let (data, (alias, z0), skipped) = row?;
        nyquist = nyquist.max(alias);
        zero = zero.max(z0);
        pairs_skipped += skipped;
        pairs_evaluated += data.len();
        for (b, dm, xm) in data {
            for m in 0..dm.len() {
                let blk = &mut blocks[m];
                let f = first[m];
                let nb = n_kept - f;
                let (ia, ib) = (a - f, b - f);
                let (d, x) = (dm[m], xm[m]);
                // rows: out channel b; columns: in channel a
                let tm_tm = d.re;
                let te_te = d.im;
                let tm_te = x.im;
                let te_tm = x.re;
                blk[(ib, ia)] = tm_tm;
                blk[(nb + ib, nb + ia)] = te_te;
                blk[(ib, nb + ia)] = tm_te;
                blk[(nb + ib, ia)] = te_tm;
                blk[(ia, ib)] = tm_tm;
                blk[(nb + ia, nb + ib)] = te_te;
                blk[(nb + ia, ib)] = tm_te;
                blk[(ia, nb + ib)] = te_tm;
            }
        }
    }

    let norm0 = blocks[0].amax();
    let m_max = match config.m_max {
        Some(m) => m,
        None => blocks
            .iter()
            .rposition(|blk| blk.amax() >= M_CUTOFF * norm0)
            .unwrap_or(0),
    };
    blocks.truncate(m_max + 1);
    let m_tail = if norm0 > 0.0 {
        blocks[m_max].amax() / norm0
    } else {
        0.0
    };
    let aliasing = if zero > 0.0 { nyquist / zero } else { 0.0 };
    let diagnostics = BlockDiagnostics {
        m_max,
        m_tail,
        aliasing,
        pairs_evaluated,
        pairs_skipped,
    };
    let blocks = blocks
        .into_iter()
        .enumerate()
        .map(|(m, entries)| BlockMatrix {
            m,
            xi,
            first_radial: first[m],
            entries,
        })
        .collect();
    Ok((blocks, diagnostics))
}

/// Indices of rows that carry any entry above the floor.
fn active_rows(m: &DMatrix<f64>) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|v| v.abs() > ENTRY_FLOOR))
        .collect()
}

/// ln det(1 − M) by Cholesky factorization of the symmetric matrix 1 − M.
pub fn log_det_one_minus(matrix: &DMatrix<f64>, xi: f64, m: usize) -> Result<f64> {
    let idx = active_rows(matrix);
    if idx.is_empty() {
        return Ok(0.0);
    }
    let d = idx.len();
    let a = DMatrix::from_fn(d, d, |i, j| {
        let v = -matrix[(idx[i], idx[j])];
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    let chol = a.cholesky().ok_or_else(|| Error::NonPhysical {
        xi,
        m,
        detail: "1 - M is not positive definite (spectral radius >= 1)".into(),
    })?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>())
}

/// (2 − δ_{m0}) ln det(1 − M_m).
pub fn log_det_contribution(block: &BlockMatrix) -> Result<f64> {
    Ok(block.multiplicity() * log_det_one_minus(&block.entries, block.xi, block.m)?)
}

/// −Σ_{r ≤ r_max} tr(M^r)/r, the truncated Mercator series of ln det(1 − M).
pub fn mercator_log_det(matrix: &DMatrix<f64>, r_max: usize) -> f64 {
    let mut power = matrix.clone();
    let mut sum = 0.0;
    for r in 1..=r_max {
        sum -= power.trace() / r as f64;
        if r < r_max {
            power = &power * matrix;
        }
    }
    sum
}

/// Σ_m (2 − δ_{m0}) tr(M_m^r) at ξ.
pub fn trace_mr_numeric(
    r: usize,
    xi: f64,
    geometry: &Geometry,
    kind: KernelKind,
    config: &QuadratureConfig,
) -> Result<f64> {
    if r == 0 {
        return Err(Error::domain("trace_Mr_numeric", "r must be >= 1"));
    }
    let blocks = build_blocks(xi, geometry, kind, config)?;
    Ok(blocks
        .par_iter()
        .map(|b| b.multiplicity() * trace_power(&b.entries, r))
        .collect::<Vec<_>>()
        .iter()
        .sum())
}

fn trace_power(m: &DMatrix<f64>, r: usize) -> f64 {
    match r {
        1 => m.trace(),
        2 => m.iter().map(|v| v * v).sum(),
        _ => {
            let half = r / 2;
            let mut p = m.clone();
            for _ in 1..half {
                p = &p * m;
            }
            if r.is_multiple_of(2) {
                p.iter().map(|v| v * v).sum()
            } else {
                let q = &p * m;
                p.component_mul(&q).sum()
            }
        }
    }
}

/// Σ_m (2 − δ_{m0}) ln det(1 − M_m) at ξ, with the block diagnostics.
pub fn xi_integrand(
    xi: f64,
    geometry: &Geometry,
    kind: KernelKind,
    config: &QuadratureConfig,
) -> Result<(f64, BlockDiagnostics)> {
    let (blocks, diag) = build_blocks_with_diagnostics(xi, geometry, kind, config)?;
    let parts: Vec<Result<f64>> = blocks.par_iter().map(log_det_contribution).collect();
    let mut sum = 0.0;
    for p in parts {
        sum += p?;
    }
    Ok((sum, diag))
}

/// One node of the ξ quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiSample {
    /// ξ in units of c/L
    pub xi: f64,
    pub weight: f64,
    pub integrand: f64,
    pub m_max: usize,
    pub m_tail: f64,
    pub aliasing: f64,
}

/// Convergence indicators gathered over the ξ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// largest relative max-norm of the last kept azimuthal block
    pub m_tail: f64,
    /// largest relative Fourier coefficient at the Nyquist index
    pub aliasing: f64,
    /// contribution of the last ξ node relative to the total
    pub xi_tail: f64,
    pub m_max_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryEcho {
    pub radius: f64,
    pub gap: f64,
    pub aspect_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// energy in units of ħc/L
    pub energy: f64,
    pub energy_unit: String,
    pub e_pfa: f64,
    pub ratio_to_pfa: f64,
    pub kernel: KernelKind,
    pub geometry: GeometryEcho,
    pub config: QuadratureConfig,
    pub convergence: Convergence,
    pub xi_samples: Vec<XiSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_joule: Option<f64>,
}

impl EnergyReport {
    /// Adds the SI energy for a gap given in metres.
    pub fn with_length_unit(mut self, metres_per_unit: f64) -> Self {
        let gap_m = self.geometry.gap * metres_per_unit;
        self.energy_joule = Some(UnitSystem::to_joule(self.energy, gap_m));
        self
    }
}

/// Casimir energy E·L/(ħc) for the geometry.
pub fn energy(
    geometry: &Geometry,
    kind: KernelKind,
    config: &QuadratureConfig,
) -> Result<EnergyReport> {
    config.validate()?;
    let l = geometry.gap;
    let (xs, ws) = xi_rule(geometry, config);
    let mut samples = Vec::with_capacity(xs.len());
    let mut total = 0.0;
    for (&xi, &w) in xs.iter().zip(&ws) {
        let (f, d) = xi_integrand(xi, geometry, kind, config)?;
        total += w * f;
        samples.push(XiSample {
            xi: xi * l,
            weight: w * l,
            integrand: f,
            m_max: d.m_max,
            m_tail: d.m_tail,
            aliasing: d.aliasing,
        });
    }
    // E = (1/2π) ∫dξ ..., reported in units of ħc/L
    let energy = total / (2.0 * PI) * l;
    let e_pfa = e_pfa(geometry);
    let last = samples
        .last()
        .map(|s| (s.weight * s.integrand).abs())
        .unwrap_or(0.0);
    let convergence = Convergence {
        m_tail: samples.iter().map(|s| s.m_tail).fold(0.0, f64::max),
        aliasing: samples.iter().map(|s| s.aliasing).fold(0.0, f64::max),
        xi_tail: if total != 0.0 {
            last / (total * l).abs()
        } else {
            0.0
        },
        m_max_used: samples.iter().map(|s| s.m_max).max().unwrap_or(0),
    };
    Ok(EnergyReport {
        energy,
        energy_unit: UnitSystem::ENERGY_UNIT.to_string(),
        e_pfa,
        ratio_to_pfa: energy / e_pfa,
        kernel: kind,
        geometry: GeometryEcho {
            radius: geometry.radius,
            gap: geometry.gap,
            aspect_ratio: geometry.aspect_ratio(),
        },
        config: config.clone(),
        convergence,
        xi_samples: samples,
        energy_joule: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let g = Geometry::new(10.0, 1.0).unwrap();
        let mut c = QuadratureConfig::for_geometry(&g);
        assert!(c.validate().is_ok());
        c.n_azimuthal = 100;
        assert!(c.validate().is_err());
        c.n_azimuthal = 64;
        c.m_max = Some(40);
        assert!(c.validate().is_err());
        c.m_max = Some(32);
        c.n_xi = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn log_det_of_zero_and_rank_one() {
        let z = DMatrix::<f64>::zeros(6, 6);
        assert_eq!(log_det_one_minus(&z, 1.0, 0).unwrap(), 0.0);
        let v = nalgebra::DVector::<f64>::from_vec(vec![1.0, 2.0, -2.0, 0.5]);
        let v = &v / v.norm();
        let q: f64 = 0.37;
        let m = &v * v.transpose() * q;
        let got = log_det_one_minus(&m, 1.0, 0).unwrap();
        assert!((got - (1.0 - q).ln()).abs() < 1e-14);
        assert!((mercator_log_det(&m, 200) - (1.0 - q).ln()).abs() < 1e-14);
    }

    #[test]
    fn nonphysical_block_is_rejected() {
        let m = DMatrix::<f64>::identity(3, 3) * 1.2;
        assert!(matches!(
            log_det_one_minus(&m, 0.5, 3),
            Err(Error::NonPhysical { m: 3, .. })
        ));
    }

    #[test]
    fn trace_powers() {
        let m = DMatrix::from_row_slice(3, 3, &[0.2, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.1]);
        for r in 1..6 {
            let mut p = m.clone();
            for _ in 1..r {
                p = &p * &m;
            }
            assert!((trace_power(&m, r) - p.trace()).abs() < 1e-15);
        }
    }
}
