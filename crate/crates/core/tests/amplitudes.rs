use casimir_core::mie::{amplitudes_exact, amplitudes_wkb, diffraction_coefficients, MieTable};
use casimir_core::reflection::{sphere_matrix_element, KernelKind};
use casimir_core::spectral::{Direction, Polarization, SpectralPoint};

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[test]
fn wkb_deviation_is_second_order() {
    let z = -2.0;
    let xi = 1.0;
    let xs = [50.0, 100.0, 200.0, 400.0];
    let (sp, sa) = diffraction_coefficients(xi, z);
    let mut dev_perp = Vec::new();
    let mut dev_par = Vec::new();
    for &x in &xs {
        let r = x / xi;
        let e = amplitudes_exact(xi, r, z).unwrap();
        let w = amplitudes_wkb(xi, r, z, 0).unwrap();
        let q_perp = e.s_perp.div(w.s_perp).value();
        let q_par = e.s_par.div(w.s_par).value();
        dev_perp.push((q_perp - 1.0 - sp / r).abs());
        dev_par.push((q_par - 1.0 - sa / r).abs());
        // order 1 is closer than order 0
        let w1 = amplitudes_wkb(xi, r, z, 1).unwrap();
        assert!((e.s_perp.div(w1.s_perp).value() - 1.0).abs() < (q_perp - 1.0).abs());
    }
    assert!(slope(&xs, &dev_perp) <= -1.5, "{dev_perp:?}");
    assert!(slope(&xs, &dev_par) <= -1.5, "{dev_par:?}");
}

#[test]
fn specular_wkb_exponent_cancels_translation() {
    for &(xi, k, r) in &[(0.3f64, 0.7, 50.0), (2.0, 0.1, 800.0), (0.01, 3.0, 120.0)] {
        let kap = xi.hypot(k);
        let z = -(1.0 + 2.0 * k * k / (xi * xi));
        let w = amplitudes_wkb(xi, r, z, 0).unwrap();
        let expected = (0.5 * xi * r).ln() + 2.0 * kap * r;
        assert!((w.s_par.ln_abs() - expected).abs() <= 4.0 * f64::EPSILON * expected.abs());
    }
}

#[test]
fn doubling_ell_max_does_not_change_sums() {
    for &(x, z) in &[(30.0, -1.0), (80.0, -3.0), (300.0, -1.2)] {
        let a = amplitudes_exact(1.0, x, z).unwrap();
        let table = MieTable::new(
            x,
            2 * casimir_core::mie::ell_cap(x, ((1.0 - z) / 2.0f64).sqrt()),
        )
        .unwrap();
        let b = table.amplitudes(z).unwrap();
        assert!(a.s_perp.relative_difference(&b.s_perp) < 1e-12);
        assert!(a.s_par.relative_difference(&b.s_par) < 1e-12);
    }
}

#[test]
fn specular_exact_and_wkb1_elements_agree_to_second_order() {
    // x = ξR = 200, specular channel
    let (xi, k) = (1.0, 0.8);
    let mut devs = Vec::new();
    for r in [100.0, 200.0, 400.0] {
        let i = SpectralPoint::new(xi, k, 0.0, Polarization::TM, Direction::Up).unwrap();
        let o = SpectralPoint::new(xi, k, 0.0, Polarization::TM, Direction::Down).unwrap();
        let e = sphere_matrix_element(&i, &o, r, KernelKind::ExactMie).unwrap();
        let w = sphere_matrix_element(&i, &o, r, KernelKind::Wkb1).unwrap();
        let w0 = sphere_matrix_element(&i, &o, r, KernelKind::Wkb0).unwrap();
        let d1 = e.relative_difference(&w);
        assert!(d1 < e.relative_difference(&w0));
        devs.push(d1 * r);
    }
    // R·deviation → 0
    assert!(devs[2] < 0.6 * devs[0], "{devs:?}");
}
