//! Quadrature rules: adaptive Gauss–Kronrod for one-dimensional integrals
//! and fixed Gauss–Legendre product rules on balls.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive G7/K15 integral of `f` over `[a, b]` to `max(abs_tol, rel_tol |I|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let (mut total, mut err) = (v, e);
    for _ in 0..MAX_INTERVALS {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
    }
    // recompute from scratch to shed accumulated rounding before judging
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    if err <= abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}]: estimate {total}, error {err}"
        )))
    }
}

/// `∫_a^∞ f` by doubling segments until two consecutive segments fall
/// below `tail_tol`.
pub fn integrate_to_infinity(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    width: f64,
    tail_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut lo = a;
    let mut w = width;
    let mut total = 0.0;
    let mut small = 0;
    for _ in 0..400 {
        let seg = integrate(&mut f, lo, lo + w, tail_tol * 1e-2, rel_tol)?;
        total += seg;
        if seg.abs() < tail_tol {
            small += 1;
            if small >= 2 {
                return Ok(total);
            }
        } else {
            small = 0;
        }
        lo += w;
        w *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Quadrature(format!(
        "tail beyond {a} does not decay below {tail_tol}"
    )))
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Surface area of the unit sphere in `R^d` (2 for `d = 1`).
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// `∫_{r0 < |z| < r1} f(|z|) dz` for a radial integrand; `r1 = ∞` allowed.
pub fn radial_integral(
    d: usize,
    f: impl Fn(f64) -> f64,
    r0: f64,
    r1: f64,
    tol: f64,
) -> Result<f64> {
    let g = |r: f64| f(r) * r.powi(d as i32 - 1);
    let s = if r1.is_infinite() {
        integrate_to_infinity(g, r0, 1.0, tol, 1e-12)?
    } else {
        integrate(g, r0, r1, tol, 1e-12)?
    };
    Ok(unit_sphere_area(d) * s)
}

/// Composite Gauss–Legendre nodes and weights on `[a, b]`.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap());
    let pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in &pairs {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// Fixed product rule for integrals over the ball `B_R ⊂ R^d`, `d ≤ 3`.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub d: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl BallRule {
    pub fn new(d: usize, radius: f64, panels: usize, order: usize) -> Result<BallRule> {
        let (rn, rw) = composite_legendre(0.0, radius, panels, order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match d {
            1 => {
                let (n, w) = composite_legendre(-radius, radius, 2 * panels, order);
                nodes = n.into_iter().map(|x| vec![x]).collect();
                weights = w;
            }
            2 => {
                let na = 4 * order.max(4);
                for (&r, &w) in rn.iter().zip(&rw) {
                    for j in 0..na {
                        let phi = 2.0 * PI * j as f64 / na as f64;
                        nodes.push(vec![r * phi.cos(), r * phi.sin()]);
                        weights.push(w * r * 2.0 * PI / na as f64);
                    }
                }
            }
            3 => {
                let na = 4 * order.max(4);
                let (cn, cw) = composite_legendre(-1.0, 1.0, 2, order);
                for (&r, &w) in rn.iter().zip(&rw) {
                    for (&ct, &wt) in cn.iter().zip(&cw) {
                        let st = (1.0 - ct * ct).sqrt();
                        for j in 0..na {
                            let phi = 2.0 * PI * j as f64 / na as f64;
                            nodes.push(vec![r * st * phi.cos(), r * st * phi.sin(), r * ct]);
                            weights.push(w * r * r * wt * 2.0 * PI / na as f64);
                        }
                    }
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "ball quadrature implemented for d <= 3, got {d}"
                )))
            }
        }
        Ok(BallRule { d, nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(z))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_kronrod_integrates_smooth_and_peaked_functions() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-13);
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0 * (1.0f64 / 1e-2).atan() / 1e-2, max_relative = 1e-10);
    }

    #[test]
    fn semi_infinite_exponential_and_power_tails() {
        let v = integrate_to_infinity(|x| (-x).exp(), 5.0, 1.0, 1e-15, 1e-13).unwrap();
        assert_relative_eq!(v, (-5.0f64).exp(), max_relative = 1e-10);
        let v = integrate_to_infinity(|x| x.powf(-3.0), 2.0, 1.0, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(v, 1.0 / 8.0, max_relative = 1e-8);
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(unit_ball_volume(2), PI, epsilon = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-13);
        let v = radial_integral(3, |_| 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(v, 4.0 * PI / 3.0 * 8.0, max_relative = 1e-12);
    }

    #[test]
    fn ball_rules_match_gaussian_integrals() {
        for d in 1..=3 {
            let rule = BallRule::new(d, 6.0, 6, 12).unwrap();
            let v = rule.integrate(|z| (-z.iter().map(|x| x * x).sum::<f64>()).exp() * (1.0 + z[0]));
            let exact = PI.powf(d as f64 / 2.0);
            assert_relative_eq!(v, exact, max_relative = 1e-10);
        }
    }
}
