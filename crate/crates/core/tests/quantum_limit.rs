use jpa_core::limit::{limit_curve, limit_curve_with_oracle, nql_closed_form, nql_quadrature, LimitQuery, Regime};
use jpa_core::physics::{quantum_efficiency, reference, AmplifierParams};
use proptest::prelude::*;

fn amp(g0: f64, tau: f64, delta: f64, b: f64) -> AmplifierParams {
    AmplifierParams::from_gain_bandwidth(5e9, g0, tau, delta, b).unwrap()
}

fn branch_points(p: &AmplifierParams) -> [f64; 5] {
    let b = p.b_meas();
    let b1 = (2.0 * p.delta() - b).max(b);
    let b2 = 2.0 * p.delta() + b;
    [0.05 * b, 0.7 * b, 0.5 * (b + b1), 0.5 * (b1 + b2), 1.2 * b2]
}

fn cross_check(g0: f64, rel: f64) {
    for tau in [5e6, 15e6, 45e6] {
        for b in [15e3, 60e3, 200e3] {
            for delta in [30e3, 37.5e3, 300e3] {
                let p = amp(g0, tau, delta, b);
                let values: Vec<(f64, f64)> = branch_points(&p)
                    .iter()
                    .map(|&b_s| {
                        let q = LimitQuery::new(p, b_s).unwrap();
                        (nql_closed_form(&q), nql_quadrature(&q).unwrap())
                    })
                    .collect();
                let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.1));
                for (c, o) in values {
                    assert!(
                        (c - o).abs() <= rel * scale.max(1e-6),
                        "tau {tau}, B {b}, delta {delta}: closed {c} vs oracle {o}"
                    );
                }
            }
        }
    }
}

#[test]
fn closed_form_tracks_quadrature_at_moderate_gain() {
    cross_check(1e4, 1e-2);
}

#[test]
fn closed_form_tracks_quadrature_at_high_gain() {
    cross_check(1e6, 1e-3);
}

#[test]
fn curves_have_knees_at_b2() {
    for delta in [30e3, 37.5e3, 300e3] {
        let p = amp(1e6, 15e6, delta, 30e3);
        let b2 = 2.0 * delta + 30e3;
        let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 4.0 * b2 / 400.0).collect();
        let curve = limit_curve(&p, &grid).unwrap();
        for (b_s, eta) in curve.b_s_grid.iter().zip(&curve.eta_ql) {
            if *b_s >= b2 {
                assert_eq!(*eta, 1.0);
            } else {
                assert!(*eta < 1.0, "eta = {eta} below the knee at {b_s}");
            }
        }
    }
}

#[test]
fn narrow_tone_reaches_half_at_reference_setup() {
    let q = LimitQuery::new(reference::amplifier(), 1e-2).unwrap();
    let eta = quantum_efficiency(nql_closed_form(&q)).unwrap();
    assert!((0.49..=0.51).contains(&eta));
    assert_eq!(q.regime(), Regime::BelowB);
}

#[test]
fn oracle_column_on_reference_setup() {
    let p = reference::amplifier();
    let b2 = 2.0 * p.delta() + p.b_meas();
    let grid: Vec<f64> = jpa_core::pipeline::logspace(p.b_meas() / 100.0, 4.0 * b2, 60);
    let curve = limit_curve_with_oracle(&p, &grid).unwrap();
    let max = curve.n_ql.iter().fold(0.0_f64, |m, &v| m.max(v));
    assert!(curve.max_oracle_deviation().unwrap() <= 1e-2 * max);
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert!(text.lines().next().unwrap().contains("n_ql_oracle"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_lies_between_zero_and_half(
        tau in 2e6..60e6f64,
        delta in 10e3..400e3f64,
        b in 5e3..300e3f64,
        frac in 0.0..3.0f64,
    ) {
        let p = amp(1e6, tau, delta, b);
        let b_s = frac * (2.0 * delta + b);
        let q = LimitQuery::new(p, b_s).unwrap();
        let n = nql_closed_form(&q);
        prop_assert!((0.0..=0.5).contains(&n));
        let o = nql_quadrature(&q).unwrap();
        prop_assert!((0.0..=0.5).contains(&o));
    }

    #[test]
    fn bound_does_not_increase_with_bandwidth(
        tau in 2e6..60e6f64,
        delta in 10e3..400e3f64,
        b in 5e3..300e3f64,
    ) {
        let p = amp(1e6, tau, delta, b);
        let b2 = 2.0 * delta + b;
        let mut prev = f64::INFINITY;
        for k in 1..=200 {
            let n = nql_closed_form(&LimitQuery::new(p, k as f64 * 1.5 * b2 / 200.0).unwrap());
            prop_assert!(n <= prev + 1e-12, "increase to {} after {}", n, prev);
            prev = n;
        }
    }

    #[test]
    fn closed_form_is_continuous_at_thresholds(
        tau in 2e6..60e6f64,
        delta in 10e3..400e3f64,
        b in 5e3..300e3f64,
    ) {
        let p = amp(1e6, tau, delta, b);
        let mut knots = vec![b, 2.0 * delta + b];
        if 2.0 * delta > b {
            knots.push(2.0 * delta - b);
        }
        for k in knots {
            let lo = nql_closed_form(&LimitQuery::new(p, k - 1e-3).unwrap());
            let hi = nql_closed_form(&LimitQuery::new(p, k + 1e-3).unwrap());
            prop_assert!((lo - hi).abs() < 1e-6, "jump {} -> {} at {}", lo, hi, k);
        }
    }
}
