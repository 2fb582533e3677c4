use std::collections::BTreeMap;
use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::quadrature::unit_ball_volume;
use crate::sde::presets::preset;
use crate::sde::RegularityDecl;

fn inputs(name: &str, d: usize, params: &[(&str, f64)], t: f64) -> RegularityInputs {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    RegularityInputs::from_model(&preset(name, Some(d), &p).unwrap().model, t).unwrap()
}

/// Largest integer `k >= 0` with `k < x` by counting.
fn count_below(x: f64) -> Option<u32> {
    if x <= 0.0 {
        return None;
    }
    let mut k = 0;
    while ((k + 1) as f64) < x {
        k += 1;
    }
    Some(k)
}

#[test]
fn q_star_examples() {
    // tθ/(4d) = 8 and 2
    assert_eq!(q_star(8.0, 4.0, 1).unwrap(), 3);
    assert_eq!(q_star(2.0, 4.0, 1).unwrap(), 1);
    assert_eq!(q_star(1e-6, 1.0, 2).unwrap(), 0);
    assert!(matches!(q_star(1.0, f64::INFINITY, 1), Err(Error::InfiniteTheta)));
}

#[test]
fn largest_below_snaps_to_integers() {
    assert_eq!(largest_below(2.0), 1);
    assert_eq!(largest_below(2.0 + 1e-12), 1);
    assert_eq!(largest_below(2.0 - 1e-12), 1);
    assert_eq!(largest_below(2.5), 2);
    assert_eq!(largest_below(0.3), 0);
    assert_eq!(largest_below(-0.5), -1);
}

#[test]
fn polynomial_decay_example() {
    for d in 1..=3usize {
        for p in [4.0, 5.5, 10.0, 12.0, 17.3, 30.0, 31.0] {
            let i = inputs("example1-poly", d, &[("p", p)], 1.0);
            let df = d as f64;
            let expected = if p >= df * (df + 3.0) {
                Smoothness::Finite(count_below(p / df - df - 2.0).unwrap())
            } else {
                Smoothness::NoResult
            };
            assert_eq!(predicted_smoothness(&i).unwrap(), expected, "d = {d}, p = {p}");
        }
    }
    assert_eq!(
        predicted_smoothness(&inputs("example1-poly", 1, &[], 1.0)).unwrap(),
        Smoothness::Finite(8)
    );
}

#[test]
fn weak_dependence_exponential_example() {
    for d in 1..=2usize {
        for a in [0.05, 0.2, 1.0] {
            let rd = unit_ball_volume(d);
            let df = d as f64;
            for t in [0.3, 1.0, 2.7, 6.0, 15.0, 40.0, 123.0] {
                let i = inputs("example2", d, &[("a", a), ("q", d as f64 + 1.0)], t);
                let mut k = None;
                for cand in 0..10_000u32 {
                    if t > 8.0 * a * df * (3.0 * cand as f64 + 3.0 * df - 1.0) / rd {
                        k = Some(cand);
                    } else {
                        break;
                    }
                }
                let expected = k.map_or(Smoothness::NoResult, Smoothness::Finite);
                assert_eq!(predicted_smoothness(&i).unwrap(), expected, "d = {d}, a = {a}, t = {t}");
            }
        }
    }
    let i = inputs("example2", 1, &[("c_exp", 0.5)], 1.0);
    assert_eq!(predicted_smoothness(&i).unwrap(), Smoothness::Infinite);
    let i = inputs("example2", 1, &[("c_exp", 1.5)], 1.0);
    assert_eq!(predicted_smoothness(&i).unwrap(), Smoothness::NoResult);
}

#[test]
fn levy_driven_example() {
    for (rho, k) in [(0.2, Some(1)), (0.1, Some(6)), (0.25, Some(0)), (0.3, None), (0.125, Some(4))] {
        let i = inputs("example3-levy", 1, &[("rho", rho)], 1.0);
        let expected = k.map_or(Smoothness::NoResult, Smoothness::Finite);
        assert_eq!(predicted_smoothness(&i).unwrap(), expected, "rho = {rho}");
    }
}

#[test]
fn case_two_matches_truncation_rate() {
    for t in [2.0, 10.0, 55.0, 300.0] {
        let i = inputs("example1-exp", 1, &[], t);
        let q = q_star(t, i.theta, 1).unwrap();
        let k = predicted_smoothness(&i).unwrap();
        // infinite p1, p2: the sup q* - d is not attained, so the side
        // condition needs q* - d > 1
        let expected = if q >= 3 {
            Smoothness::Finite(q as u32 - 2)
        } else {
            Smoothness::NoResult
        };
        assert_eq!(k, expected, "t = {t}");
    }
    let i = RegularityInputs {
        t: 40.0,
        d: 1,
        theta: 2.0,
        p1: 3.0,
        p2: 5.0,
        rho: 0.5,
        mode: Mode::B,
    };
    let c = optimize_truncation(1.0, &i).unwrap();
    let k = predicted_smoothness(&i).unwrap();
    assert_eq!(k, Smoothness::Finite(largest_below(c.rate - 1.0) as u32));
}

#[test]
fn truncation_balance_for_equal_exponents() {
    let (p, rho, t, theta) = (6.0, 0.5, 30.0, 2.0);
    let i = RegularityInputs {
        t,
        d: 1,
        theta,
        p1: p,
        p2: p,
        rho,
        mode: Mode::B,
    };
    let q = q_star(t, theta, 1).unwrap() as f64;
    // with p1 = p2 the second exponent is the smaller one
    let crossing = (q + 2.0) / (p + q * rho);
    let c = optimize_truncation(10.0, &i).unwrap();
    let spacing = 1.0 / ((R_GRID + 1) as f64 * rho);
    assert!((c.r - crossing).abs() <= spacing, "{c:?} vs {crossing}");
    assert_relative_eq!(c.m, 10f64.powf(c.r), max_relative = 1e-14);
    assert_relative_eq!(c.rate, p * crossing - 2.0, epsilon = 2.0 * p * spacing);

    let mut i0 = i;
    i0.theta = f64::INFINITY;
    i0.rho = 1e-3;
    let c = optimize_truncation(10.0, &i0).unwrap();
    assert!(c.r > 0.999 / i0.rho);
    assert!(c.exponents[2].is_infinite());

    let mut ia = i;
    ia.mode = Mode::A;
    assert!(optimize_truncation(1.0, &ia).is_err());
}

fn exponential_model(theta: f64) -> ModelSpec {
    let mut m = preset("gaussian-only", Some(1), &BTreeMap::new()).unwrap().model;
    m.h = Arc::new(|_| 1.0);
    m.mu_ball = Some(Arc::new(|r| 2.0 * r));
    m.c_bar = Arc::new(|r| (-r).exp());
    m.c_low = Arc::new(|r| (-r).exp());
    m.gamma_bar = Arc::new(|_| 0.8);
    m.gamma_low = Arc::new(|_| 0.8);
    m.lipschitz = Some(0.7);
    m.regularity = Some(RegularityDecl {
        theta,
        p1: f64::INFINITY,
        p2: f64::INFINITY,
        rho: 1.0,
        mode: Mode::B,
    });
    m
}

#[test]
fn envelope_terms_match_closed_forms() {
    let model = exponential_model(f64::INFINITY);
    let (t, g, c) = (1.5, 0.8, 0.7);
    for (xi, m) in [(2.0, 3.0), (10.0, 5.5), (30.0, 1.0)] {
        let e = fourier_envelope(xi, m, &model, 2, t, Mode::B).unwrap();
        let term1 = t * g * (-2.0 * (m - 1.0)).exp() * 0.5 * xi * xi;
        let term2 = xi * t * (c * t).exp() * 2.0 * g * (-m).exp();
        assert_relative_eq!(e.term1, term1, max_relative = 1e-8);
        assert_relative_eq!(e.term2, term2, max_relative = 1e-8);
        assert_relative_eq!(e.term3_factor, 1.0 + (2.0 * (m + 1.0)).powi(2), max_relative = 1e-14);
        let a = fourier_envelope(xi, m, &model, 2, t, Mode::A).unwrap();
        assert_eq!(a.term3_factor, 1.0);
        assert_relative_eq!(a.term3_shape(), xi.powi(-2), max_relative = 1e-14);
    }
    let finite = exponential_model(4.0);
    // 4(3q - 1)/t < 4 needs q < (t + 1)/3
    assert!(fourier_envelope(2.0, 3.0, &finite, 1, 2.5, Mode::B).is_ok());
    assert!(matches!(
        fourier_envelope(2.0, 3.0, &finite, 2, 2.5, Mode::B),
        Err(Error::ValidityViolation { q: 2, .. })
    ));
}

#[test]
fn fitted_tail_exponents() {
    let mut model = exponential_model(f64::INFINITY);
    model.c_bar = Arc::new(|r| (1.0 + r * r).powf(-2.0));
    model.c_low = Arc::new(|r| (1.0 + r * r).powf(-2.0));
    let (p1, p2) = tail_exponents(&model).unwrap();
    assert!((p1 - 3.0).abs() < 0.05, "{p1}");
    assert!((p2 - 7.0).abs() < 0.07, "{p2}");
    model.regularity = Some(RegularityDecl {
        theta: f64::INFINITY,
        p1: f64::NAN,
        p2: 1.5,
        rho: 1.0,
        mode: Mode::B,
    });
    let i = RegularityInputs::from_model(&model, 1.0).unwrap();
    assert!((i.p1 - 3.0).abs() < 0.05);
    assert_eq!(i.p2, 1.5);
}

#[test]
fn report_json_shape() {
    let p = preset("example1-poly", Some(1), &BTreeMap::new()).unwrap();
    let r = report(&p.model, p.t).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for key in ["schema", "theta", "q_star", "p1", "p2", "rho", "mode", "k", "r_opt", "validity"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["theta"], "inf");
    assert_eq!(v["k"], 8);
    assert_eq!(v["mode"], "b");
    assert!(v["q_star"].is_null());
    let g = preset("gaussian-only", Some(1), &BTreeMap::new()).unwrap();
    assert!(matches!(report(&g.model, 1.0), Err(Error::Config(_))));
}

proptest! {
    #[test]
    fn smoothness_monotone_in_t(t1 in 0.1f64..200.0, dt in 0.0f64..100.0, theta in 0.05f64..5.0, d in 1usize..4) {
        let base = RegularityInputs { t: t1, d, theta, p1: 1.0, p2: 1.0, rho: 1.0, mode: Mode::A };
        let later = RegularityInputs { t: t1 + dt, ..base };
        prop_assert!(rank(predicted_smoothness(&base).unwrap()) <= rank(predicted_smoothness(&later).unwrap()));
    }

    #[test]
    fn smoothness_monotone_in_tail_exponents(
        p1 in 0.5f64..60.0, p2 in 0.5f64..60.0, dp1 in 0.0f64..20.0, dp2 in 0.0f64..20.0,
        rho in 0.1f64..3.0, finite in proptest::bool::ANY, t in 1.0f64..100.0,
    ) {
        let theta = if finite { 3.0 } else { f64::INFINITY };
        let base = RegularityInputs { t, d: 1, theta, p1, p2, rho, mode: Mode::B };
        let more = RegularityInputs { p1: p1 + dp1, p2: p2 + dp2, ..base };
        prop_assert!(rank(predicted_smoothness(&base).unwrap()) <= rank(predicted_smoothness(&more).unwrap()));
    }

    #[test]
    fn q_star_is_valid(t in 0.01f64..500.0, theta in 0.01f64..50.0, d in 1usize..5) {
        let q = q_star(t, theta, d).unwrap();
        let x = t * theta / (4.0 * d as f64);
        prop_assume!(((x + 1.0) / 3.0 - ((x + 1.0) / 3.0).round()).abs() > 1e-9);
        if q >= 1 {
            prop_assert!(validity_holds(q, t, theta, d));
        }
        prop_assert!(!validity_holds(q + 1, t, theta, d));
    }
}

fn rank(s: Smoothness) -> i64 {
    match s {
        Smoothness::NoResult => -1,
        Smoothness::Finite(k) => k as i64,
        Smoothness::Infinite => i64::MAX,
    }
}
