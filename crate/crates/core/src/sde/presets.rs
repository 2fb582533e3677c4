//! Built-in models patterned on the worked examples of the theory.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::model::{norm_sq, Coefficients, Mode, ModelSpec, Radial, RegularityDecl};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::unit_ball_volume;

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 5] = [
    "gaussian-only",
    "example1-exp",
    "example1-poly",
    "example2",
    "example3-levy",
];

/// A preset model together with its default horizon and truncation level.
#[derive(Debug, Clone)]
pub struct Preset {
    pub model: ModelSpec,
    pub t: f64,
    pub m: f64,
}

struct Params<'a> {
    name: &'a str,
    given: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.allowed.push(key);
        self.given.get(key).copied().unwrap_or(default)
    }

    fn finish(&self) -> Result<()> {
        for k in self.given.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "unknown parameter '{k}' for preset '{}' (expected one of {:?})",
                    self.name, self.allowed
                )));
            }
        }
        Ok(())
    }
}

/// Amplitude profile `e(r)` of `c(z, x) = s(x) z e(|z|)`.
#[derive(Debug, Clone, Copy)]
enum Profile {
    /// `exp(-a (1 + r²)^{k/2})`
    Exp { a: f64, k: f64 },
    /// `(1 + r²)^{-(p + 1)/2}`
    Poly { p: f64 },
}

impl Profile {
    fn jet(&self, r2: &Jet) -> Result<Jet> {
        let base = r2 + 1.0;
        match *self {
            Profile::Exp { a, k } => Ok((base.powf(k / 2.0)? * -a).exp()),
            Profile::Poly { p } => base.powf(-(p + 1.0) / 2.0),
        }
    }

    fn value(&self, r: f64) -> f64 {
        match *self {
            Profile::Exp { a, k } => (-a * (1.0 + r * r).powf(k / 2.0)).exp(),
            Profile::Poly { p } => (1.0 + r * r).powf(-(p + 1.0) / 2.0),
        }
    }

    /// `1 + r e'(r) / e(r)`: radial eigenvalue of `∂_z (z e(|z|))` over `e`.
    fn radial_factor(&self, r: f64) -> f64 {
        match *self {
            Profile::Exp { a, k } => 1.0 - a * k * r * r * (1.0 + r * r).powf(k / 2.0 - 1.0),
            Profile::Poly { p } => 1.0 - (p + 1.0) * r * r / (1.0 + r * r),
        }
    }

    /// Smallest singular value of `∂_z (z e(|z|))`.
    fn lower(&self, r: f64, d: usize) -> f64 {
        let radial = self.radial_factor(r).abs();
        let m = if d == 1 { radial } else { radial.min(1.0) };
        m * self.value(r)
    }
}

/// Scale `s(x) = s0 (1 + amp sin x_1)`.
#[derive(Debug, Clone, Copy)]
struct Scale {
    s0: f64,
    amp: f64,
}

impl Scale {
    fn jet(&self, x: &[Jet]) -> Jet {
        (x[0].sin() * self.amp + 1.0) * self.s0
    }
    fn lo(&self) -> f64 {
        self.s0 * (1.0 - self.amp)
    }
    fn hi(&self) -> f64 {
        self.s0 * (1.0 + self.amp)
    }
}

/// Rate that depends on the state only, `lo + (hi - lo)(1 + tanh x_1)/2`.
#[derive(Debug, Clone, Copy)]
struct StateRate {
    lo: f64,
    hi: f64,
}

impl StateRate {
    fn jet(&self, x: &[Jet]) -> Jet {
        (x[0].tanh() + 1.0) * (0.5 * (self.hi - self.lo)) + self.lo
    }
}

fn tanh_drift(x: &[Jet], kappa: f64) -> Option<Vec<Jet>> {
    if kappa == 0.0 {
        return None;
    }
    Some(x.iter().map(|xi| xi.tanh() * -kappa).collect())
}

fn amplitude(z: &[Jet], x: &[Jet], scale: &Scale, profile: &Profile) -> Result<Vec<Jet>> {
    let f = scale.jet(x) * profile.jet(&norm_sq(z))?;
    Ok(z.iter().map(|zi| zi * &f).collect())
}

struct NoJumps;

impl Coefficients for NoJumps {
    fn c(&self, z: &[Jet], _x: &[Jet]) -> Result<Vec<Jet>> {
        Ok(z.iter().map(|zi| zi * 0.0).collect())
    }
    fn gamma(&self, z: &[Jet], _x: &[Jet]) -> Result<Jet> {
        Ok(&z[0] * 0.0)
    }
    fn ln_h(&self, z: &[Jet]) -> Result<Jet> {
        Ok(&z[0] * 0.0)
    }
}

struct Example1 {
    scale: Scale,
    profile: Profile,
    rate: StateRate,
    kappa: f64,
}

impl Coefficients for Example1 {
    fn c(&self, z: &[Jet], x: &[Jet]) -> Result<Vec<Jet>> {
        amplitude(z, x, &self.scale, &self.profile)
    }
    fn gamma(&self, _z: &[Jet], x: &[Jet]) -> Result<Jet> {
        Ok(self.rate.jet(x))
    }
    fn drift(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        tanh_drift(x, self.kappa)
    }
    fn ln_h(&self, z: &[Jet]) -> Result<Jet> {
        Ok(&z[0] * 0.0)
    }
    fn gamma_mass(&self, x: &[Jet], _radius: f64, mu_ball: f64) -> Option<Result<Jet>> {
        Some(Ok(self.rate.jet(x) * mu_ball))
    }
}

struct Example2 {
    scale: Scale,
    profile: Profile,
    alpha: StateRate,
    q: f64,
    kappa: f64,
}

impl Example2 {
    fn exponent(&self, z: &[Jet], x: &[Jet]) -> Result<Jet> {
        let w = (norm_sq(z) + 1.0).powf(-self.q / 2.0)?;
        Ok(-(self.alpha.jet(x) * w))
    }
}

impl Coefficients for Example2 {
    fn c(&self, z: &[Jet], x: &[Jet]) -> Result<Vec<Jet>> {
        amplitude(z, x, &self.scale, &self.profile)
    }
    fn gamma(&self, z: &[Jet], x: &[Jet]) -> Result<Jet> {
        Ok(self.exponent(z, x)?.exp())
    }
    fn ln_gamma(&self, z: &[Jet], x: &[Jet]) -> Result<Jet> {
        self.exponent(z, x)
    }
    fn drift(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        tanh_drift(x, self.kappa)
    }
    fn ln_h(&self, z: &[Jet]) -> Result<Jet> {
        Ok(&z[0] * 0.0)
    }
}

struct Levy {
    f0: f64,
    f_amp: f64,
    g: (f64, f64),
    rho: f64,
}

impl Levy {
    fn rate(&self, x: &[Jet]) -> Jet {
        (x[0].sin() + 1.0) * (0.5 * (self.g.1 - self.g.0)) + self.g.0
    }
}

impl Coefficients for Levy {
    fn c(&self, z: &[Jet], x: &[Jet]) -> Result<Vec<Jet>> {
        let f = (x[0].cos() * self.f_amp + 1.0) * self.f0;
        let w = (&z[0] * &z[0] + 1.0).recip()?;
        Ok(vec![f * &z[0] * w])
    }
    fn gamma(&self, _z: &[Jet], x: &[Jet]) -> Result<Jet> {
        Ok(self.rate(x))
    }
    fn ln_h(&self, z: &[Jet]) -> Result<Jet> {
        Ok((&z[0] * &z[0] + 1.0).ln()? * (0.5 * (self.rho - 1.0)))
    }
    fn gamma_mass(&self, x: &[Jet], _radius: f64, mu_ball: f64) -> Option<Result<Jet>> {
        Some(Ok(self.rate(x) * mu_ball))
    }
}

fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Radial {
    Arc::new(f)
}

fn constant(v: f64) -> Radial {
    radial(move |_| v)
}

/// Builds a preset by name with parameter overrides.
pub fn preset(name: &str, d: Option<usize>, params: &BTreeMap<String, f64>) -> Result<Preset> {
    let mut p = Params {
        name,
        given: params,
        allowed: Vec::new(),
    };
    let out = match name {
        "gaussian-only" => {
            let d = d.unwrap_or(1);
            let variance = p.get("variance", 0.5);
            let x0 = p.get("x0", 0.3);
            Preset {
                model: ModelSpec {
                    name: name.into(),
                    d,
                    x0: vec![x0; d],
                    coeffs: Arc::new(NoJumps),
                    c_sup: 0.0,
                    h: constant(1.0),
                    h_sup: 1.0,
                    mu_ball: Some(radial(move |r| unit_ball_volume(d) * r.powi(d as i32))),
                    c_bar: constant(0.0),
                    c_low: constant(0.0),
                    gamma_bar: constant(0.0),
                    gamma_low: constant(0.0),
                    gamma_x_lip: 0.0,
                    drift_lip: 0.0,
                    lipschitz: None,
                    variance: Some(variance),
                    regularity: None,
                },
                t: 1.0,
                m: 1.0,
            }
        }
        "example1-exp" | "example1-poly" | "example2" => {
            let d = d.unwrap_or(1);
            let scale = Scale {
                s0: p.get("s0", 1.0),
                amp: p.get("s_amp", 0.25),
            };
            let kappa = p.get("kappa", 0.5);
            let x0 = p.get("x0", 0.0);
            let (profile, decl) = if name == "example1-poly" {
                let pp = p.get("p", 12.0);
                (
                    Profile::Poly { p: pp },
                    RegularityDecl {
                        theta: f64::INFINITY,
                        p1: pp - d as f64,
                        p2: 2.0 * pp - d as f64,
                        rho: d as f64,
                        mode: Mode::B,
                    },
                )
            } else {
                let a = p.get("a", 1.0);
                let k = p.get("c_exp", d as f64);
                let lead = if name == "example2" {
                    1.0
                } else {
                    p.get("gamma_low", 0.5)
                };
                let theta = if k < d as f64 {
                    f64::INFINITY
                } else if k > d as f64 {
                    0.0
                } else {
                    lead * unit_ball_volume(d) / (2.0 * a)
                };
                (
                    Profile::Exp { a, k },
                    RegularityDecl {
                        theta,
                        p1: f64::INFINITY,
                        p2: f64::INFINITY,
                        rho: d as f64,
                        mode: if name == "example2" { Mode::A } else { Mode::B },
                    },
                )
            };
            let c_bar = {
                let (hi, prof) = (scale.hi(), profile);
                radial(move |r| hi * r * prof.value(r))
            };
            let c_low = {
                let (lo, prof) = (scale.lo(), profile);
                radial(move |r| lo * prof.lower(r, d))
            };
            let vol = unit_ball_volume(d);
            let mu_ball = Some(radial(move |r| vol * r.powi(d as i32)));
            let (coeffs, c_sup, gamma_bar, gamma_low, gamma_x_lip): (
                Arc<dyn Coefficients>,
                f64,
                Radial,
                Radial,
                f64,
            ) = if name == "example2" {
                let alpha = StateRate {
                    lo: p.get("alpha_low", 0.5),
                    hi: p.get("alpha_high", 1.5),
                };
                let q = p.get("q", 2.0);
                if q <= d as f64 {
                    return Err(Error::Config(format!("example2 needs q > d, got q = {q}")));
                }
                (
                    Arc::new(Example2 {
                        scale,
                        profile,
                        alpha,
                        q,
                        kappa,
                    }),
                    1.0,
                    radial(move |r| (-alpha.lo / (1.0 + r * r).powf(q / 2.0)).exp()),
                    radial(move |r| (-alpha.hi / (1.0 + r * r).powf(q / 2.0)).exp()),
                    0.5 * (alpha.hi - alpha.lo),
                )
            } else {
                let lo = p.get("gamma_low", 0.5);
                let hi = p.get("c_sup", 1.0);
                if !(0.0 < lo && lo <= hi) {
                    return Err(Error::Config(format!(
                        "need 0 < gamma_low <= c_sup, got {lo} and {hi}"
                    )));
                }
                (
                    Arc::new(Example1 {
                        scale,
                        profile,
                        rate: StateRate { lo, hi },
                        kappa,
                    }),
                    hi,
                    constant(hi),
                    constant(lo),
                    0.5 * (hi - lo),
                )
            };
            if scale.amp < 0.0 || scale.amp >= 1.0 {
                return Err(Error::Config("s_amp must lie in [0, 1)".into()));
            }
            Preset {
                model: ModelSpec {
                    name: name.into(),
                    d,
                    x0: vec![x0; d],
                    coeffs,
                    c_sup,
                    h: constant(1.0),
                    h_sup: 1.0,
                    mu_ball,
                    c_bar,
                    c_low,
                    gamma_bar,
                    gamma_low,
                    gamma_x_lip,
                    drift_lip: kappa,
                    lipschitz: None,
                    variance: None,
                    regularity: Some(decl),
                },
                t: 1.0,
                m: 4.0,
            }
        }
        "example3-levy" => {
            if d.is_some_and(|d| d != 1) {
                return Err(Error::Config("example3-levy is one-dimensional".into()));
            }
            let rho = p.get("rho", 0.2);
            if !(0.0 < rho && rho < 1.0) {
                return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
            }
            let f0 = p.get("f0", 1.0);
            let f_amp = p.get("f_amp", 0.3);
            let g = (p.get("g_low", 0.9), p.get("g_high", 1.5));
            if !(0.0 < g.0 && g.0 <= g.1) {
                return Err(Error::Config("need 0 < g_low <= g_high".into()));
            }
            let x0 = p.get("x0", 0.0);
            let (flo, fhi) = (f0 * (1.0 - f_amp), f0 * (1.0 + f_amp));
            let prof = Profile::Poly { p: 1.0 };
            Preset {
                model: ModelSpec {
                    name: name.into(),
                    d: 1,
                    x0: vec![x0],
                    coeffs: Arc::new(Levy { f0, f_amp, g, rho }),
                    c_sup: g.1,
                    h: radial(move |r| (1.0 + r * r).powf(0.5 * (rho - 1.0))),
                    h_sup: 1.0,
                    mu_ball: None,
                    c_bar: radial(move |r| fhi * r * prof.value(r)),
                    c_low: radial(move |r| flo * prof.lower(r, 1)),
                    gamma_bar: constant(g.1),
                    gamma_low: constant(g.0),
                    gamma_x_lip: 0.5 * (g.1 - g.0),
                    drift_lip: 0.0,
                    lipschitz: None,
                    variance: None,
                    regularity: Some(RegularityDecl {
                        theta: f64::INFINITY,
                        p1: 1.0 - rho,
                        p2: 2.0 - rho,
                        rho,
                        mode: Mode::B,
                    }),
                },
                t: 1.0,
                m: 8.0,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected one of {PRESETS:?})"
            )))
        }
    };
    p.finish()?;
    out.model.validate()?;
    Ok(out)
}
