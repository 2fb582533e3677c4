//! Density regularity calculator: maximal integration-by-parts order,
//! predicted smoothness class, the Fourier envelope of the truncated scheme
//! and the choice of truncation level `M = |ξ|^r`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sde::model::{Mode, ModelSpec};
use crate::sde::{mu_ball, tail_integral, truncation_error, u_m};

/// Points of the `r` grid on `(0, 1/ρ)`.
pub const R_GRID: usize = 10_000;

const SNAP: f64 = 1e-9;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn serialize_mode<S: Serializer>(m: &Mode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match m {
        Mode::A => "a",
        Mode::B => "b",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityInputs {
    pub t: f64,
    pub d: usize,
    /// `f64::INFINITY` for infinite broadness.
    #[serde(serialize_with = "serialize_extended")]
    pub theta: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub p1: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub p2: f64,
    pub rho: f64,
    #[serde(serialize_with = "serialize_mode")]
    pub mode: Mode,
}

impl RegularityInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.t > 0.0) || self.d == 0 {
            return bad("t must be positive and d at least 1");
        }
        if self.theta.is_nan() || self.theta < 0.0 {
            return bad("theta must be nonnegative");
        }
        if self.mode == Mode::B && !(self.p1 > 0.0 && self.p2 > 0.0 && self.rho > 0.0) {
            return bad("mode b needs p1, p2, rho > 0");
        }
        Ok(())
    }

    /// Declared inputs of a model; undeclared (NaN) `p1`, `p2` are fitted.
    pub fn from_model(model: &ModelSpec, t: f64) -> Result<Self> {
        let decl = model
            .regularity
            .ok_or_else(|| Error::Config(format!("model '{}' declares no regularity data", model.name)))?;
        let (mut p1, mut p2) = (decl.p1, decl.p2);
        if p1.is_nan() || p2.is_nan() {
            let (e1, e2) = tail_exponents(model)?;
            if p1.is_nan() {
                p1 = e1;
            }
            if p2.is_nan() {
                p2 = e2;
            }
        }
        let r = RegularityInputs {
            t,
            d: model.d,
            theta: decl.theta,
            p1,
            p2,
            rho: decl.rho,
            mode: decl.mode,
        };
        r.validate()?;
        Ok(r)
    }
}

/// `q*(t, θ) = ⌊(tθ/(4d) + 1)/3⌋`.
pub fn q_star(t: f64, theta: f64, d: usize) -> Result<usize> {
    if theta.is_infinite() {
        return Err(Error::InfiniteTheta);
    }
    if !(t > 0.0) || !(theta >= 0.0) || d == 0 {
        return Err(Error::Domain(format!("q* needs t > 0, theta >= 0, d >= 1 (t = {t}, theta = {theta})")));
    }
    Ok(((t * theta / (4.0 * d as f64) + 1.0) / 3.0 + SNAP).floor() as usize)
}

/// `4d(3q - 1)/t < θ`.
pub fn validity_holds(q: usize, t: f64, theta: f64, d: usize) -> bool {
    theta.is_infinite() || 4.0 * d as f64 * (3.0 * q as f64 - 1.0) / t < theta
}

/// Largest integer strictly below `x`, treating `x` within `1e-9` of an
/// integer as that integer.
pub fn largest_below(x: f64) -> i64 {
    let r = x.round();
    let x = if (x - r).abs() < SNAP { r } else { x };
    x.ceil() as i64 - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// Density of class `C^k`.
    Finite(u32),
    Infinite,
    NoResult,
}

impl Serialize for Smoothness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Smoothness::Finite(k) => s.serialize_u32(*k),
            Smoothness::Infinite => s.serialize_str("inf"),
            Smoothness::NoResult => s.serialize_none(),
        }
    }
}

fn from_bound(x: f64) -> Smoothness {
    let k = largest_below(x);
    if k < 0 {
        Smoothness::NoResult
    } else {
        Smoothness::Finite(k as u32)
    }
}

/// Grid `r_j = j/((N+1)ρ)`, `j = 1..=N`.
fn r_grid(rho: f64) -> impl Iterator<Item = f64> {
    (1..=R_GRID).map(move |j| j as f64 / ((R_GRID + 1) as f64 * rho))
}

fn case2_bound(r: f64, i: &RegularityInputs, q: usize) -> f64 {
    let d = i.d as f64;
    (r * i.p1 - 1.0 - d)
        .min(r * i.p2 - 2.0 - d)
        .min(q as f64 * (1.0 - r * i.rho) - d)
}

/// Predicted smoothness class of the density of `X_t`.
pub fn predicted_smoothness(i: &RegularityInputs) -> Result<Smoothness> {
    i.validate()?;
    let d = i.d as f64;
    Ok(match i.mode {
        Mode::A => {
            if i.theta.is_infinite() {
                Smoothness::Infinite
            } else if i.theta == 0.0 {
                Smoothness::NoResult
            } else {
                // t > (3k + 3d - 1) 4d/θ  ⇔  k < (tθ/(4d) - 3d + 1)/3
                from_bound((i.t * i.theta / (4.0 * d) - 3.0 * d + 1.0) / 3.0)
            }
        }
        Mode::B => {
            if i.theta.is_infinite() {
                let x = (i.p1 / i.rho - 1.0 - d).min(i.p2 / i.rho - 2.0 - d);
                if x >= 1.0 - SNAP {
                    from_bound(x)
                } else {
                    Smoothness::NoResult
                }
            } else if i.theta == 0.0 {
                Smoothness::NoResult
            } else {
                let q = q_star(i.t, i.theta, i.d)?;
                let sup = r_grid(i.rho)
                    .map(|r| case2_bound(r, i, q))
                    .fold(f64::NEG_INFINITY, f64::max);
                if sup >= 1.0 - SNAP {
                    from_bound(sup)
                } else {
                    Smoothness::NoResult
                }
            }
        }
    })
}

/// Truncation exponent maximizing the guaranteed decay rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationChoice {
    pub r: f64,
    /// `M = |ξ|^r`.
    pub m: f64,
    /// `(r p1 - 1, r p2 - 2, q (1 - r ρ))`; the last is infinite when θ is.
    #[serde(serialize_with = "serialize_triple")]
    pub exponents: [f64; 3],
    #[serde(serialize_with = "serialize_extended")]
    pub rate: f64,
}

fn serialize_triple<S: Serializer>(v: &[f64; 3], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct E(f64);
    impl Serialize for E {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serialize_extended(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(3))?;
    for x in v {
        seq.serialize_element(&E(*x))?;
    }
    seq.end()
}

/// Grid maximization of `min(r p1 - 1, r p2 - 2, q (1 - r ρ))` over
/// `r ∈ (0, 1/ρ)` with `q = q*(t, θ)` (no third term when θ is infinite).
pub fn optimize_truncation(xi: f64, i: &RegularityInputs) -> Result<TruncationChoice> {
    i.validate()?;
    if i.mode != Mode::B {
        return Err(Error::Config("truncation choice applies to mode b".into()));
    }
    let q = if i.theta.is_infinite() {
        None
    } else {
        Some(q_star(i.t, i.theta, i.d)? as f64)
    };
    let exps = |r: f64| {
        [
            r * i.p1 - 1.0,
            r * i.p2 - 2.0,
            q.map_or(f64::INFINITY, |q| q * (1.0 - r * i.rho)),
        ]
    };
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for r in r_grid(i.rho) {
        let rate = exps(r).into_iter().fold(f64::INFINITY, f64::min);
        if rate > best.1 {
            best = (r, rate);
        }
    }
    Ok(TruncationChoice {
        r: best.0,
        m: xi.abs().powf(best.0),
        exponents: exps(best.0),
        rate: best.1,
    })
}

/// The three terms of the Fourier envelope at frequency `ξ`; the constant
/// `C_q` of the last term is unknown and left symbolic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierEnvelope {
    pub xi: f64,
    pub m: f64,
    pub q: usize,
    /// `t ∫_{B_{M-1}^c} c̲² γ̲ dμ · |ξ|²/2`.
    pub term1: f64,
    /// `|ξ| t e^{Ct} ∫_{B_M^c} c̄ γ̄ dμ`.
    pub term2: f64,
    /// Term three equals `C_q · term3_factor / |ξ|^q`.
    pub term3_factor: f64,
}

impl FourierEnvelope {
    /// `term3_factor / |ξ|^q`, the last term per unit `C_q`.
    pub fn term3_shape(&self) -> f64 {
        self.term3_factor / self.xi.abs().powi(self.q as i32)
    }
}

pub fn fourier_envelope(xi: f64, m: f64, model: &ModelSpec, q: usize, t: f64, mode: Mode) -> Result<FourierEnvelope> {
    let theta = model.regularity.map_or(f64::INFINITY, |r| r.theta);
    if q == 0 || !validity_holds(q, t, theta, model.d) {
        return Err(Error::ValidityViolation { q, t, theta });
    }
    let term3_factor = match mode {
        Mode::A => 1.0,
        Mode::B => 1.0 + mu_ball(model, m + 1.0)?.powi(q as i32),
    };
    Ok(FourierEnvelope {
        xi,
        m,
        q,
        term1: u_m(model, m, t)? * 0.5 * xi * xi,
        term2: xi.abs() * truncation_error(model, m, t)?,
        term3_factor,
    })
}

/// Fitted `(p1, p2)`: minus the log-log slopes of `∫_{B_M^c} c̄ γ̄ dμ` and
/// `∫_{B_M^c} c̲² γ̲ dμ` over `M ∈ [4, 64]`; infinite when the tails vanish.
pub fn tail_exponents(model: &ModelSpec) -> Result<(f64, f64)> {
    let ms: Vec<f64> = (0..=8).map(|k| 4.0 * 2f64.powf(k as f64 * 0.5)).collect();
    let fit = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let mut pts = Vec::new();
        for &m in &ms {
            let v = f(m)?;
            if v <= 0.0 {
                return Ok(f64::INFINITY);
            }
            pts.push((m.ln(), v.ln()));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Ok(-sxy / sxx)
    };
    let (cb, gb) = (model.c_bar.clone(), model.gamma_bar.clone());
    let p1 = fit(&|m| tail_integral(model, |r| cb(r) * gb(r), m))?;
    let (cl, gl) = (model.c_low.clone(), model.gamma_low.clone());
    let p2 = fit(&|m| tail_integral(model, |r| cl(r).powi(2) * gl(r), m))?;
    Ok((p1, p2))
}

/// Regularity summary of one model at horizon `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub schema: u32,
    pub model: String,
    #[serde(flatten)]
    pub inputs: RegularityInputs,
    pub q_star: Option<usize>,
    pub k: Smoothness,
    pub r_opt: Option<f64>,
    /// Whether `4d(3q* - 1)/t < θ` holds (always for infinite θ).
    pub validity: bool,
}

pub fn report(model: &ModelSpec, t: f64) -> Result<RegularityReport> {
    let inputs = RegularityInputs::from_model(model, t)?;
    let q = q_star(t, inputs.theta, inputs.d).ok();
    let r_opt = match inputs.mode {
        Mode::B => Some(optimize_truncation(1.0, &inputs)?.r),
        Mode::A => None,
    };
    Ok(RegularityReport {
        schema: 1,
        model: model.name.clone(),
        inputs,
        q_star: q,
        k: predicted_smoothness(&inputs)?,
        r_opt,
        validity: q.map_or(true, |q| q >= 1 && validity_holds(q, t, inputs.theta, inputs.d)),
    })
}

#[cfg(test)]
mod tests;
