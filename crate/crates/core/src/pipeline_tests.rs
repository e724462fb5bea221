//! End-to-end checks across modules through the public API.

use crate::{
    build_implied_curves, calibrate_bdt, estimate_moments, fitted_series, parse_series,
    price_zcb, price_zcb_const, simple_returns, solve_ptilde, CurvePoint, EquityParams,
    PricingPolicy, SeriesKind, SeriesSchema, YieldCurve, DEFAULT_DELTA,
};

fn rate_csv() -> String {
    let mut text = String::from("DATE,DGS10\n");
    let mut rate = 3.0f64;
    let start = chrono::NaiveDate::from_ymd_opt(2022, 6, 15).unwrap();
    for i in 0..253 {
        let step = ((i * 31) % 9) as f64 - 4.0;
        rate *= 1.0 + 0.004 * step;
        let date = start + chrono::Duration::days(i);
        text.push_str(&format!("{date},{rate:.3}\n"));
    }
    text
}

#[test]
fn csv_to_calibration_to_price() {
    let schema = SeriesSchema::new("DATE", "DGS10").with_percent(true);
    let parsed = parse_series(rate_csv().as_bytes(), &schema, SeriesKind::Rate).unwrap();
    assert_eq!(parsed.skipped, 0);
    let returns = simple_returns(&parsed.series).unwrap();
    let moments = estimate_moments(&returns, DEFAULT_DELTA).unwrap();
    assert_eq!(moments.n_obs, 252);

    let cal = calibrate_bdt(&moments, 0.0377).unwrap();
    let fit = fitted_series(&cal, &parsed.series).unwrap();
    assert_eq!(fit.len(), 253);
    assert_eq!(fit[0].model, fit[0].market);

    let lattice = cal.lattice(252).unwrap();
    let eq = EquityParams::new(0.08, 0.2, 0.5).unwrap();
    let price = price_zcb(&lattice, &eq, 252, &PricingPolicy::default()).unwrap().price;
    assert!(price > 0.0 && price < 1.0);
}

#[test]
fn market_price_inverts_to_lattice_price() {
    let cal = crate::BdtCalibration::from_coefficients(0.0377, 1.0236, 1.0464, DEFAULT_DELTA).unwrap();
    let lattice = cal.lattice(504).unwrap();
    let price = price_zcb_const(&lattice, 0.52, 504).unwrap();
    let y = -price.ln() / 2.0;
    let curve = YieldCurve::new(
        vec![
            CurvePoint { maturity_years: 1.0, yield_value: y },
            CurvePoint { maturity_years: 3.0, yield_value: y },
        ],
        None,
    )
    .unwrap();
    let solved = solve_ptilde(&lattice, price, 504, 1e-14).unwrap();
    assert!((solved.ptilde - 0.52).abs() < 1e-9);

    let eq = EquityParams::new(0.2017, 0.2, 0.4821).unwrap();
    let points = build_implied_curves(&curve, &cal, &eq, 0.0377, &[2.0, 1.5, 5.0], 1e-13).unwrap();
    assert_eq!(points[0].n_steps, 504);
    assert!((points[0].ptilde.unwrap() - 0.52).abs() < 1e-8);
    assert_eq!(points[1].maturity, 1.5);
    assert!(points[2].ptilde.is_none());
    assert!(!points[2].diagnostics.flags.is_empty());
}
