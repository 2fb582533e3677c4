use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::quadrature::unit_ball_volume;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn lebesgue(d: usize, support: f64) -> RadialMeasure {
    RadialMeasure {
        d,
        density: Arc::new(|_| 1.0),
        support,
        density_sup: 1.0,
    }
}

fn compact(t: f64) -> LevyFunctional {
    LevyFunctional {
        f: RadialFn(Arc::new(|_| 1.0)),
        nu: lebesgue(1, 2.0),
        b: 1.0,
        t,
    }
}

fn exp_decay(t: f64) -> LevyFunctional {
    LevyFunctional {
        f: RadialFn(Arc::new(|r: f64| (-r).exp())),
        nu: lebesgue(1, f64::INFINITY),
        b: 1.0,
        t,
    }
}

#[test]
fn alpha_beta_closed_forms() {
    let lf = compact(1.0);
    assert_eq!(lf.alpha_beta(0.0).unwrap(), (0.0, 0.0));
    let mut last = (0.0, 0.0);
    for i in 1..=40 {
        let s = 0.25 * i as f64;
        let (a, b) = lf.alpha_beta(s).unwrap();
        assert!((a - 4.0 * (1.0 - (-s).exp())).abs() < 1e-12);
        assert!((b - 2.0 * (1.0 - (-s).exp())).abs() < 1e-12);
        assert!(0.0 <= b && b <= a && a >= last.0 && b >= last.1);
        last = (a, b);
    }
}

#[test]
fn laplace_transform_is_poisson() {
    let t = 1.3;
    let lf = compact(t);
    assert_eq!(lf.laplace(0.0).unwrap(), 1.0);
    for s in [0.1, 0.5, 1.0, 3.0] {
        let want = (-2.0 * t * (1.0 - f64::exp(-s))).exp();
        assert!((lf.laplace(s).unwrap() - want).abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 20_000;
    let s = 0.7;
    let xs: Vec<f64> = (0..n).map(|_| (-s * lf.sample(&mut rng).unwrap()).exp()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - lf.laplace(s).unwrap()).abs() < 3.0 * sd / (n as f64).sqrt());
}

/// `Ein(s) = ∫_0^s (1 - e^{-v}) / v dv`.
fn ein(s: f64) -> f64 {
    crate::quadrature::integrate(|v: f64| if v == 0.0 { 1.0 } else { -(-v).exp_m1() / v }, 0.0, s, 1e-15, 1e-13)
        .unwrap()
}

#[test]
fn i_t_p_exponential_and_divergent_cases() {
    let lf = exp_decay(1.0);
    for s in [0.5, 10.0, 1e3] {
        assert!((lf.alpha(s).unwrap() - 2.0 * ein(s)).abs() < 1e-9 * (1.0 + ein(s)));
    }
    let ts = tail_slope(&lf).unwrap();
    assert!((ts.slope - 2.0).abs() < 1e-6);
    // ∫_0^∞ e^{-2 Ein(s)} ds with the e^{-2γ}/s² tail beyond 1e6.
    let body = crate::quadrature::integrate(|u: f64| (u - 2.0 * ein(u.exp())).exp(), -40.0, 6.0 * 10f64.ln(), 1e-14, 1e-11)
        .unwrap();
    let oracle = body + (-2.0 * EULER_GAMMA).exp() / 1e6;
    let got = i_t_p(&lf, 1.0).unwrap();
    assert!((got - oracle).abs() < 1e-6 * oracle, "{got} vs {oracle}");
    assert!(matches!(i_t_p(&lf, 3.0), Err(Error::Divergent(_))));
    assert!(matches!(i_t_p(&compact(1.0), 1.0), Err(Error::Divergent(_))));
}

fn poisson_series(mean: f64, u: f64, p: f64) -> f64 {
    let mut term = (-mean).exp();
    let mut total = 0.0;
    for k in 0..200 {
        total += term / (k as f64 + u).powf(p);
        term *= mean / (k + 1) as f64;
    }
    total
}

#[test]
fn inverse_moments_against_series_and_bounds() {
    let lf = compact(1.0);
    assert!((lf.u_t().unwrap() - 2.0).abs() < 1e-12);
    for p in [1.0, 2.0] {
        let exact = inverse_moment_exact(&lf, 2.0, p).unwrap();
        assert!((exact - poisson_series(2.0, 2.0, p)).abs() < 1e-9);
        assert!(matches!(inverse_moment_bound(&lf, p), Err(Error::Divergent(_))));
    }
    for (p, t) in [(1.0, 1.0), (2.0, 1.5)] {
        let lf = exp_decay(t);
        let u = lf.u_t().unwrap();
        assert!((u - 2.0 * t * (-1.0f64).exp()).abs() < 1e-12);
        let exact = inverse_moment_exact(&lf, u, p).unwrap();
        let bound = inverse_moment_bound(&lf, p).unwrap();
        assert!(exact <= bound, "{exact} > {bound}");
        assert!(inverse_moment_exact(&lf, 1e6, p).unwrap() <= 1e-6f64.powf(p));
    }
}

fn decades() -> Vec<f64> {
    (2..=24).map(|i| 10f64.powf(i as f64 / 4.0)).collect()
}

#[test]
fn theta_regimes() {
    // c = d = 1, a0 = 1, unit rate: θ = r_1 / 2 = 1.
    let f = |r: f64| (-2.0 * r).exp();
    let est = broadness_theta(&f, &lebesgue(1, f64::INFINITY), &decades()).unwrap();
    assert_eq!(est.kind, ThetaKind::Finite, "{est:?}");
    assert!((est.theta - 1.0).abs() < 0.05 * 1.0);
    // c̲ = exp(-a (1 + r²)^{1/2}) approaches the same limit.
    let a0: f64 = 1.5;
    let f = move |r: f64| (-2.0 * a0 * (1.0 + r * r).sqrt()).exp();
    let est = broadness_theta(&f, &lebesgue(1, f64::INFINITY), &decades()).unwrap();
    let want = 2.0 / (2.0 * a0);
    assert_eq!(est.kind, ThetaKind::Finite);
    assert!((est.theta - want).abs() < 0.05 * want, "{} vs {want}", est.theta);
    // d = 2, c = 2 with rate 0.7: θ = 0.7 π / 2.
    let f = |r: f64| (-2.0 * r * r).exp();
    let nu = RadialMeasure { d: 2, density: Arc::new(|_| 0.7), support: f64::INFINITY, density_sup: 0.7 };
    let est = broadness_theta(&f, &nu, &decades()).unwrap();
    let want = 0.7 * unit_ball_volume(2) / 2.0;
    assert!((est.theta - want).abs() < 0.05 * want);
    // c < d.
    let f = |r: f64| (-2.0 * r).exp();
    let est = broadness_theta(&f, &lebesgue(2, f64::INFINITY), &decades()).unwrap();
    assert_eq!(est.kind, ThetaKind::Infinite);
    // c > d.
    let f = |r: f64| (-2.0 * r * r).exp();
    let est = broadness_theta(&f, &lebesgue(1, f64::INFINITY), &decades()).unwrap();
    assert_eq!(est.kind, ThetaKind::Zero);
    // polynomial decay.
    let f = |r: f64| (0.5 / (1.0 + r * r)).powi(2);
    let est = broadness_theta(&f, &lebesgue(1, f64::INFINITY), &decades()).unwrap();
    assert_eq!(est.kind, ThetaKind::Infinite);
    assert!(broadness_theta(&f, &lebesgue(1, f64::INFINITY), &[10.0, 100.0, 1000.0]).is_err());
}
