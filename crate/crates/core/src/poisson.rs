//! Laplace transforms, the integrals `I_t^p`, inverse-moment bounds and the
//! broadness exponent of Poisson functionals.

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, unit_sphere_area};
use crate::sde::truncation::uniform_ball;
use crate::sde::Radial;

/// Radial measure `ν(dz) = n(|z|) dz` on the ball of radius `support`
/// (`∞` allowed).
#[derive(Clone)]
pub struct RadialMeasure {
    pub d: usize,
    pub density: Radial,
    pub support: f64,
    /// Upper bound of the density, used for sampling.
    pub density_sup: f64,
}

impl std::fmt::Debug for RadialMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialMeasure")
            .field("d", &self.d)
            .field("support", &self.support)
            .finish()
    }
}

impl RadialMeasure {
    /// `∫_{r0 < |z| < r1} φ(|z|) ν(dz)`.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64, r0: f64, r1: f64) -> Result<f64> {
        let hi = r1.min(self.support);
        if hi <= r0 {
            return Ok(0.0);
        }
        let d = self.d as i32;
        let g = |r: f64| phi(r) * (self.density)(r) * r.powi(d - 1);
        let s = if hi.is_infinite() {
            integrate_to_infinity(g, r0, 1.0, 1e-15, 1e-12)?
        } else {
            integrate(g, r0, hi, 1e-15, 1e-12)?
        };
        Ok(unit_sphere_area(self.d) * s)
    }

    /// `ν(B_r)`.
    pub fn ball(&self, r: f64) -> Result<f64> {
        self.integrate(|_| 1.0, 0.0, r)
    }
}

/// `N_t(1_{B_g} f)`: `f` summed over the points of a Poisson measure with
/// intensity `t ν` that fall in the ball `B` of radius `b`.
#[derive(Clone, Debug)]
pub struct LevyFunctional {
    pub f: RadialFn,
    pub nu: RadialMeasure,
    pub b: f64,
    pub t: f64,
}

/// A radial function with a debug name.
#[derive(Clone)]
pub struct RadialFn(pub Radial);

impl std::fmt::Debug for RadialFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RadialFn")
    }
}

impl LevyFunctional {
    fn f(&self, r: f64) -> f64 {
        (self.f.0)(r)
    }

    /// `(α_{g,f}(s), β_{B,g,f}(s))`.
    pub fn alpha_beta(&self, s: f64) -> Result<(f64, f64)> {
        if s < 0.0 {
            return Err(Error::Domain(format!("negative argument {s}")));
        }
        if s == 0.0 {
            return Ok((0.0, 0.0));
        }
        let k = |r: f64| -(-s * self.f(r)).exp_m1();
        let inner = self.nu.integrate(k, 0.0, self.b)?;
        let outer = self.nu.integrate(k, self.b, f64::INFINITY)?;
        Ok((inner + outer, outer))
    }

    /// `α_f(s)` over the whole space.
    pub fn alpha(&self, s: f64) -> Result<f64> {
        Ok(self.alpha_beta(s)?.0)
    }

    /// `E exp(-s N_t(1_{B_g} f)) = exp(-t (α - β))`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        let (a, b) = self.alpha_beta(s)?;
        Ok((-self.t * (a - b)).exp())
    }

    /// `U_t = t ∫_{B^c} f dν`.
    pub fn u_t(&self) -> Result<f64> {
        Ok(self.t * self.nu.integrate(|r| self.f(r), self.b, f64::INFINITY)?)
    }

    /// One draw of `N_t(1_{B_g} f)`; needs `ν(B) < ∞`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let r = self.b.min(self.nu.support);
        if !r.is_finite() {
            return Err(Error::Sampler("sampling needs a bounded region".into()));
        }
        let mass = self.t * self.nu.ball(r)?;
        let n = rand_distr::Poisson::new(mass.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Sampler(e.to_string()))?;
        let count = if mass > 0.0 { rng.sample(n) as u64 } else { 0 };
        let mut total = 0.0;
        for _ in 0..count {
            let z = loop {
                let z = uniform_ball(self.nu.d, r, rng);
                let rz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if rng.random::<f64>() * self.nu.density_sup < (self.nu.density)(rz) {
                    break rz;
                }
            };
            total += self.f(z);
        }
        Ok(total)
    }
}

/// Tail slope `lim α_f(s) / ln s` with its grid diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSlope {
    pub slope: f64,
    pub slopes: Vec<f64>,
}

const SLOPE_GRID: [f64; 5] = [1e4, 1e6, 1e8, 1e10, 1e12];

/// Local slopes of `α_f` against `ln s` on `[1e4, 1e12]`.
pub fn tail_slope(lf: &LevyFunctional) -> Result<TailSlope> {
    let a: Vec<f64> = SLOPE_GRID
        .iter()
        .map(|&s| lf.alpha(s))
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = a
        .windows(2)
        .zip(SLOPE_GRID.windows(2))
        .map(|(v, s)| (v[1] - v[0]) / (s[1] / s[0]).ln())
        .collect();
    Ok(TailSlope {
        slope: *slopes.last().unwrap(),
        slopes,
    })
}

/// `I_t^p(f) = ∫_0^∞ s^{p-1} exp(-t α_f(s)) ds`.
///
/// The integral runs in `u = ln s` up to `s*` with `t α_f(s*) = 50`; the
/// tail beyond uses the power law `exp(-t α_f(s*)) (s/s*)^{-t θ'}`.
pub fn i_t_p(lf: &LevyFunctional, p: f64) -> Result<f64> {
    if p < 1.0 || lf.t <= 0.0 {
        return Err(Error::Domain(format!("need p >= 1 and t > 0, got p = {p}, t = {}", lf.t)));
    }
    let ts = tail_slope(lf)?;
    let n = ts.slopes.len();
    let (last, prev) = (ts.slopes[n - 1], ts.slopes[n - 2]);
    let growing = last > prev && prev * lf.t > p;
    let stable = (last - prev).abs() <= 0.02 * last.abs().max(prev.abs()) + 1e-6;
    if !growing && !stable {
        return Err(Error::Inconclusive(format!(
            "tail slopes {:?} do not settle",
            ts.slopes
        )));
    }
    if !growing && last * lf.t <= p {
        return Err(Error::Divergent(format!(
            "t θ' = {} does not exceed p = {p}",
            last * lf.t
        )));
    }
    let ta = |u: f64| -> f64 { lf.t * lf.alpha(u.exp()).unwrap_or(f64::NAN) };
    let u0 = -40.0;
    let mut hi = 0.0;
    while ta(hi) < 50.0 {
        hi += 1.0;
        if hi > 700.0 {
            return Err(Error::Divergent("t α_f stays below 50".into()));
        }
    }
    let mut lo = hi - 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ta(mid) < 50.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u_star = hi;
    let body = integrate(|u| (p * u - ta(u)).exp(), u0, u_star, 1e-14, 1e-10)?;
    if !body.is_finite() {
        return Err(Error::Quadrature("non-finite I_t^p body".into()));
    }
    let head = (p * u0).exp() / p;
    let tail = (p * u_star - ta(u_star)).exp() / (lf.t * last - p);
    Ok(head + body + tail)
}

/// `I_t^p(f) / Γ(p)`, the bound on `E (N_t(1_{B_g} f) + U_t)^{-p}`.
pub fn inverse_moment_bound(lf: &LevyFunctional, p: f64) -> Result<f64> {
    Ok(i_t_p(lf, p)? / gamma(p))
}

/// `E (N_t(1_{B_g} f) + u)^{-p} = Γ(p)^{-1} ∫ s^{p-1} e^{-s u} E e^{-s N} ds`.
pub fn inverse_moment_exact(lf: &LevyFunctional, u: f64, p: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("need u > 0, got {u}")));
    }
    let g = |s: f64| {
        if s == 0.0 {
            return if p == 1.0 { 1.0 } else { 0.0 };
        }
        s.powf(p - 1.0) * (-s * u).exp() * lf.laplace(s).unwrap_or(f64::NAN)
    };
    let v = integrate_to_infinity(g, 0.0, 1.0 / u, 1e-14, 1e-11)?;
    Ok(v / gamma(p))
}

/// Regime of the broadness exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaKind {
    Finite,
    Infinite,
    Zero,
}

/// Estimate of `θ = lim (1/ln a) ν(f ≥ 1/a)` with grid diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaEstimate {
    pub kind: ThetaKind,
    /// Extrapolated value (finite case); `∞` or `0` otherwise.
    pub theta: f64,
    /// `(a, ν(f ≥ 1/a) / ln a)` on the grid.
    pub ratios: Vec<(f64, f64)>,
    /// Local slopes of `ln ν(f ≥ 1/a)` against `ln ln a`.
    pub slopes: Vec<f64>,
}

/// Radius of `{f ≥ level}` for a nonincreasing radial `f`.
fn level_radius(f: &dyn Fn(f64) -> f64, level: f64) -> Result<f64> {
    if f(0.0) < level {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while f(hi) >= level {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Inconclusive("level set is unbounded".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `θ` for a nonincreasing radial `f` against `ν`.
///
/// The regime follows the last local slope `κ` of `ln ν(f ≥ 1/a)` in
/// `ln ln a`: `κ > 1.25` is infinite, `κ < 0.75` is zero, otherwise the
/// ratios are extrapolated to `1/ln a → 0` through the last three points.
pub fn broadness_theta(f: &dyn Fn(f64) -> f64, nu: &RadialMeasure, a_grid: &[f64]) -> Result<ThetaEstimate> {
    if a_grid.len() < 4 || a_grid.windows(2).any(|w| w[1] <= w[0]) || a_grid[0] <= 1.0 {
        return Err(Error::Domain("a-grid must be increasing, above 1, with at least 4 points".into()));
    }
    if a_grid[a_grid.len() - 1] / a_grid[0] < 1e4 {
        return Err(Error::Domain("a-grid must span at least four decades".into()));
    }
    let mut masses = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        masses.push(nu.ball(level_radius(f, 1.0 / a)?)?);
    }
    if masses.windows(2).any(|m| m[1] < m[0] * (1.0 - 1e-12)) {
        return Err(Error::Inconclusive("ν(f ≥ 1/a) is not monotone in a".into()));
    }
    let ratios: Vec<(f64, f64)> = a_grid
        .iter()
        .zip(&masses)
        .map(|(&a, &m)| (a, m / a.ln()))
        .collect();
    let slopes: Vec<f64> = a_grid
        .windows(2)
        .zip(masses.windows(2))
        .map(|(a, m)| {
            if m[0] <= 0.0 {
                f64::NAN
            } else {
                (m[1] / m[0]).ln() / (a[1].ln() / a[0].ln()).ln()
            }
        })
        .collect();
    let kappa = *slopes.last().unwrap();
    if !kappa.is_finite() {
        return Err(Error::Inconclusive("level sets are empty at the end of the grid".into()));
    }
    let (kind, theta) = if kappa > 1.25 {
        (ThetaKind::Infinite, f64::INFINITY)
    } else if kappa < 0.75 {
        (ThetaKind::Zero, 0.0)
    } else {
        let n = ratios.len();
        let pts: Vec<(f64, f64)> = ratios[n - 3..]
            .iter()
            .map(|&(a, r)| (1.0 / a.ln(), r))
            .collect();
        (ThetaKind::Finite, lagrange_at_zero(&pts))
    };
    Ok(ThetaEstimate {
        kind,
        theta,
        ratios,
        slopes,
    })
}

fn lagrange_at_zero(pts: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut w = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                w *= xj / (xj - xi);
            }
        }
        total += w * yi;
    }
    total
}

#[cfg(test)]
mod tests;
