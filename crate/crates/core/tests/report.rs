use casimir_core::report::{emit_csv, parse_csv, CsvRow, CSV_COLUMNS};
use casimir_core::KernelKind;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3
    ]
}

prop_compose! {
    fn row()(
        aspect_ratio in 1e-3f64..1e4, radius in 1e-3f64..1e4, gap in 1e-3f64..1e4,
        kernel in prop::sample::select(KernelKind::ALL.to_vec()),
        energy in finite(), e_pfa in finite(), ratio_to_pfa in finite(),
        n_radial in 4usize..10_000, radial_scale in 1e-3f64..1e3,
        n_azimuthal in 4usize..1_000_000, n_xi in 4usize..1000, xi_scale in 1e-3f64..1e3,
        m_max in prop::option::of(0usize..1000), m_max_used in 0usize..1000,
        m_tail in 0f64..1.0, aliasing in 0f64..1.0, xi_tail in finite(),
    ) -> CsvRow {
        CsvRow { aspect_ratio, radius, gap, kernel, energy, e_pfa, ratio_to_pfa, n_radial, radial_scale,
                 n_azimuthal, n_xi, xi_scale, m_max, m_max_used, m_tail, aliasing, xi_tail }
    }
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(row(), 0..6)) {
        let mut buf = Vec::new();
        emit_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        prop_assert_eq!(text.lines().count(), rows.len() + 1);
        prop_assert_eq!(parse_csv(text.as_bytes()).unwrap(), rows);
    }
}

#[test]
fn header_is_stable() {
    assert_eq!(
        CSV_COLUMNS.join(","),
        "aspect_ratio,radius,gap,kernel,energy,e_pfa,ratio_to_pfa,n_radial,radial_scale,n_azimuthal,n_xi,xi_scale,m_max,m_max_used,m_tail,aliasing,xi_tail"
    );
}

#[test]
fn malformed_input_is_an_error() {
    assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
    let bad = format!("{}\n{}\n", CSV_COLUMNS.join(","), ["x"; 17].join(","));
    assert!(parse_csv(bad.as_bytes()).is_err());
}
