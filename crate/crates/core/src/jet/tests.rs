use std::collections::BTreeMap;
use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

use super::*;

fn space(n: usize, k: usize) -> Arc<JetSpace> {
    JetSpace::get(n, k).unwrap()
}

fn eval(n: usize, k: usize, x: &[f64], f: &dyn Fn(&[Jet]) -> Jet) -> Jet {
    let s = space(n, k);
    f(&Jet::local_variables(&s, x))
}

/// Central difference of a jet partial one order lower.
fn fd_partial(n: usize, x: &[f64], vars: &[usize], f: &dyn Fn(&[Jet]) -> Jet) -> f64 {
    let h = 1e-5;
    let (last, rest) = vars.split_last().unwrap();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[*last] += h;
    xm[*last] -= h;
    let k = rest.len();
    let fp = eval(n, k, &xp, f).partial(rest).unwrap();
    let fm = eval(n, k, &xm, f).partial(rest).unwrap();
    (fp - fm) / (2.0 * h)
}

fn all_multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for m in &out {
            let lo = m.last().copied().unwrap_or(0);
            for v in lo..n {
                let mut c: Vec<usize> = m.clone();
                c.push(v);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

fn check_against_fd(n: usize, order: usize, x: &[f64], f: &dyn Fn(&[Jet]) -> Jet) {
    let jet = eval(n, order, x, f);
    for k in 1..=order {
        let tol = if k <= 2 { 1e-6 } else { 1e-4 };
        for m in all_multisets(n, k) {
            let a = jet.partial(&m).unwrap();
            let b = fd_partial(n, x, &m, f);
            assert!(
                (a - b).abs() <= tol * (1.0 + b.abs()),
                "partial {m:?}: jet {a}, fd {b}"
            );
        }
    }
}

#[test]
fn lift_is_identity_coordinate() {
    let s = space(3, 2);
    let v = jet_lift(&s, 1, 2.5);
    assert_eq!(v.value(), 2.5);
    assert_eq!(v.partial(&[1]).unwrap(), 1.0);
    assert_eq!(v.partial(&[0]).unwrap(), 0.0);
    assert_eq!(v.partial(&[1, 1]).unwrap(), 0.0);
    let c = Jet::constant(&s, 4.0);
    for m in all_multisets(3, 2) {
        assert_eq!(c.partial(&m).unwrap(), 0.0);
    }
}

#[test]
fn sin_times_variable_mixed_partial() {
    let f = |v: &[Jet]| v[0].sin() * &v[1];
    let x = [0.7, -1.3];
    let j = eval(2, 2, &x, &f);
    assert_relative_eq!(j.partial(&[0, 1]).unwrap(), 0.7f64.cos(), epsilon = 1e-14);
    let fd = fd_partial(2, &x, &[0, 1], &f);
    assert!((fd - 0.7f64.cos()).abs() < 1e-6);
}

#[test]
fn elementary_functions_match_finite_differences() {
    let f = |v: &[Jet]| {
        let a = (&v[0] * &v[1]).exp();
        let b = v[2].cos() + v[0].tanh();
        let c = (&v[1] * &v[1] + 1.0).sqrt().unwrap();
        let d = (&v[2] + 3.0).ln().unwrap();
        let e = (&v[0] + 2.0).powf(1.7).unwrap();
        let r = (&v[1] + 2.5).recip().unwrap();
        a * b + c * d - e * r
    };
    check_against_fd(3, 3, &[0.3, -0.4, 0.9], &f);
}

#[test]
fn division_by_zero_is_domain_error() {
    let s = space(1, 2);
    let z = Jet::constant(&s, 0.0);
    let one = Jet::constant(&s, 1.0);
    assert!(matches!(one.div(&z), Err(Error::Domain(_))));
    let v = Jet::variable(&s, 0, -1.0);
    assert!(v.ln().is_err());
    assert!(v.sqrt().is_err());
    assert!(Jet::variable(&s, 0, 0.0).sqrt().is_err());
}

#[test]
fn compose_matches_direct_evaluation() {
    let outer_f = |v: &[Jet]| v[0].sin() * v[1].exp() + &v[0] * &v[0] * &v[1];
    let inner = |v: &[Jet]| {
        vec![
            &v[0] * &v[1] + v[2].cos(),
            (&v[2] - &v[0]).tanh() + 0.5,
        ]
    };
    let x = [0.2, 0.5, -0.3];
    let big = space(3, 3);
    let xs = Jet::local_variables(&big, &x);
    let ins = inner(&xs);
    let direct = outer_f(&ins);
    let loc = space(2, 3);
    let vals: Vec<f64> = ins.iter().map(Jet::value).collect();
    let outer = outer_f(&Jet::local_variables(&loc, &vals));
    let composed = Jet::compose(&outer, &ins);
    for (a, b) in direct.coeffs().iter().zip(composed.coeffs()) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
    assert_eq!(direct.coeffs().len(), composed.coeffs().len());
}

#[test]
fn truncation_order_is_min_of_operands() {
    let s = space(2, 3);
    let a = Jet::variable(&s, 0, 1.0);
    let b = Jet::variable(&s, 1, 2.0).truncate(1);
    assert_eq!((&a * &b).order(), 1);
    assert_eq!((&a + &b).order(), 1);
    assert_eq!(a.derivative(0).unwrap().order(), 2);
    assert!(matches!(
        a.truncate(0).derivative(0),
        Err(Error::InsufficientOrder { .. })
    ));
}

#[test]
fn derive_tensor_of_coordinate_and_product() {
    let s = space(3, 2);
    let w = WeightField::unit(&s);
    let v = Jet::local_variables(&s, &[0.3, 1.1, -2.0]);
    let d1 = derive_tensor(&v[0], &w, 1).unwrap();
    assert_eq!(d1.data, vec![1.0, 0.0, 0.0]);
    let d2 = derive_tensor(&v[0], &w, 2).unwrap();
    assert!(d2.data.iter().all(|&x| x == 0.0));
    let p = derive_tensor(&(&v[0] * &v[1]), &w, 2).unwrap();
    assert_eq!(p.get(&[0, 1]), 1.0);
    assert_eq!(p.get(&[1, 0]), 1.0);
    assert!(matches!(
        derive_tensor(&v[0].truncate(1), &w, 2),
        Err(Error::InsufficientOrder { .. })
    ));
}

fn bump_weight(v: &Jet) -> Jet {
    // smooth positive weight with nonzero derivative
    (-(v * v) * 0.5).exp()
}

#[test]
fn derive_tensor_with_bump_weight() {
    let x = 0.8;
    let s = space(1, 2);
    let v = Jet::variable(&s, 0, x);
    let w = WeightField {
        pi: vec![bump_weight(&v)],
    };
    let d2 = derive_tensor(&v.sin(), &w, 2).unwrap();
    let phi = (-x * x / 2.0).exp();
    let dphi = -x * phi;
    let expected = phi * (dphi * x.cos() - phi * x.sin());
    assert_relative_eq!(d2.data[0], expected, epsilon = 1e-14);
    // nested finite difference of the weighted first derivative
    let h = 1e-5;
    let d1 = |y: f64| {
        let s1 = space(1, 1);
        let v = Jet::variable(&s1, 0, y);
        let w = WeightField {
            pi: vec![bump_weight(&v)],
        };
        derive_tensor(&v.sin(), &w, 1).unwrap().data[0]
    };
    let fd = phi * (d1(x + h) - d1(x - h)) / (2.0 * h);
    assert!((fd - d2.data[0]).abs() < 1e-6);
}

/// Polynomial with exponent-vector keys, used as an independent oracle.
#[derive(Clone, Debug)]
struct Poly(BTreeMap<Vec<u32>, f64>);

impl Poly {
    fn diff(&self, i: usize) -> Poly {
        let mut out = BTreeMap::new();
        for (e, &c) in &self.0 {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                *out.entry(e2).or_insert(0.0) += c * e[i] as f64;
            }
        }
        Poly(out)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(e, &c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    fn to_jet(&self, s: &Arc<JetSpace>, x: &[f64]) -> Jet {
        let vars = Jet::local_variables(s, x);
        let mut acc = Jet::constant(s, 0.0);
        for (e, &c) in &self.0 {
            let mut term = Jet::constant(s, c);
            for (i, &k) in e.iter().enumerate() {
                term = term * vars[i].powi(k);
            }
            acc = acc + term;
        }
        acc
    }
}

fn poly_strategy(n: usize, max_deg: u32, terms: usize) -> impl Strategy<Value = Poly> {
    proptest::collection::vec(
        (proptest::collection::vec(0..=max_deg, n), -2.0f64..2.0),
        1..=terms,
    )
    .prop_map(|ts| {
        let mut m = BTreeMap::new();
        for (e, c) in ts {
            *m.entry(e).or_insert(0.0) += c;
        }
        Poly(m)
    })
}

#[test]
fn sobolev_norm_trivial_cases() {
    let s = space(2, 2);
    let w = WeightField::unit(&s);
    let c = Jet::constant(&s, -3.0);
    assert_eq!(sobolev_norm(&[c], &w, 2).unwrap(), 3.0);
    let v = Jet::variable(&s, 0, -1.5);
    assert_eq!(sobolev_norm(&[v], &w, 2).unwrap(), 2.5);
}

#[test]
fn sobolev_norm_matches_dense_enumeration() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = (poly_strategy(3, 3, 6), proptest::collection::vec(-1.0f64..1.0, 3));
    for _ in 0..20 {
        let (p, x) = strat.new_tree(&mut runner).unwrap().current();
        let s = space(3, 3);
        let w = WeightField::unit(&s);
        let jet = p.to_jet(&s, &x);
        let mut oracle = p.eval(&x).abs();
        for k in 1..=3 {
            let mut sq = 0.0f64;
            let total = 3usize.pow(k as u32);
            for idx in 0..total {
                let mut q = p.clone();
                let mut r = idx;
                for _ in 0..k {
                    q = q.diff(r % 3);
                    r /= 3;
                }
                sq += q.eval(&x).powi(2);
            }
            oracle += sq.sqrt();
        }
        let got = sobolev_norm(&[jet], &w, 3).unwrap();
        assert!((got - oracle).abs() <= 1e-10 * (1.0 + oracle), "{got} vs {oracle}");
    }
}

#[test]
fn margins_for_constants_and_coordinates() {
    let s = space(2, 1);
    let w = WeightField::unit(&s);
    let one = Jet::constant(&s, 1.0);
    let r = norm_inequality_margin(&one, &one, &w, 0).unwrap();
    assert_eq!(r.prod.lhs, 1.0);
    assert_eq!(r.prod.rhs, 1.0);
    let s2 = space(2, 2);
    let w2 = WeightField::unit(&s2);
    let v = Jet::local_variables(&s2, &[0.4, -0.7]);
    let r = norm_inequality_margin(&v[0], &v[1], &w2, 1).unwrap();
    assert!(r.min_margin() >= 0.0, "{r:?}");
}

fn weights_for(s: &Arc<JetSpace>, x: &[f64]) -> WeightField {
    WeightField {
        pi: Jet::local_variables(s, x)
            .iter()
            .map(|v| bump_weight(v))
            .collect(),
    }
}

#[test]
fn tensor_is_symmetric_for_unit_weights() {
    let s = space(3, 3);
    let w = WeightField::unit(&s);
    let v = Jet::local_variables(&s, &[0.1, 0.2, 0.3]);
    let f = (&v[0] * &v[1]).sin() * v[2].exp();
    let t = derive_tensor(&f, &w, 3).unwrap();
    let perms = [[0, 1, 2], [2, 1, 0], [1, 0, 2], [0, 2, 1], [2, 0, 1], [1, 2, 0]];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let idx = [a, b, c];
                for p in perms {
                    let q = [idx[p[0]], idx[p[1]], idx[p[2]]];
                    assert_relative_eq!(t.get(&idx), t.get(&q), epsilon = 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_rule_is_exact(p in poly_strategy(3, 2, 4), q in poly_strategy(3, 2, 4),
                             x in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let s = space(3, 2);
        let w = weights_for(&s, &x);
        let f = p.to_jet(&s, &x);
        let g = q.to_jet(&s, &x);
        let dfg = weighted_gradient(&(&f * &g), &w).unwrap();
        let df = weighted_gradient(&f, &w).unwrap();
        let dg = weighted_gradient(&g, &w).unwrap();
        for i in 0..3 {
            let rhs = df[i].value() * g.value() + f.value() * dg[i].value();
            let scale = (df[i].value() * g.value()).abs() + (f.value() * dg[i].value()).abs();
            prop_assert!((dfg[i].value() - rhs).abs() <= 1e-12 * (scale + 1e-300));
        }
    }

    #[test]
    fn chain_rule_is_exact(p in poly_strategy(2, 2, 4), q in poly_strategy(2, 2, 4),
                           x in proptest::collection::vec(-1.0f64..1.0, 2)) {
        let s = space(2, 2);
        let w = weights_for(&s, &x);
        let f1 = p.to_jet(&s, &x);
        let f2 = q.to_jet(&s, &x);
        let phi = f1.sin() * f2.exp();
        let dphi = weighted_gradient(&phi, &w).unwrap();
        let d1 = weighted_gradient(&f1, &w).unwrap();
        let d2 = weighted_gradient(&f2, &w).unwrap();
        let (a, b) = (f1.value(), f2.value());
        let p1 = a.cos() * b.exp();
        let p2 = a.sin() * b.exp();
        for i in 0..2 {
            let rhs = p1 * d1[i].value() + p2 * d2[i].value();
            let scale = (p1 * d1[i].value()).abs() + (p2 * d2[i].value()).abs();
            prop_assert!((dphi[i].value() - rhs).abs() <= 1e-12 * (scale + 1e-300));
        }
    }

    #[test]
    fn norm_inequalities_hold(p in poly_strategy(3, 3, 5), q in poly_strategy(3, 3, 5),
                              x in proptest::collection::vec(-1.0f64..1.0, 3), l in 0usize..=3) {
        let s = space(3, 4);
        let w = weights_for(&s, &x);
        let r = norm_inequality_margin(&p.to_jet(&s, &x), &q.to_jet(&s, &x), &w, l).unwrap();
        prop_assert!(r.min_margin() >= -1e-12 * (1.0 + r.prod.rhs), "{:?}", r);
    }

    #[test]
    fn raw_partials_match_finite_differences(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.5f64..2.0) {
        let f = move |v: &[Jet]| (&v[0] * c).sin() * (&v[1] * &v[0] + 1.5).ln().unwrap() + v[1].exp();
        check_against_fd(2, 3, &[a * 0.3, b * 0.3], &f);
    }
}
