//! Truncated jump SDE with state-dependent rate, simulated as a compound
//! Poisson skeleton and replayed as a differentiable program in the random
//! coordinates.

pub mod config;
pub mod flow;
pub mod model;
pub mod presets;
pub mod truncation;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{CoordinateId, Jet, JetSpace, WeightField};
use crate::quadrature::{integrate_to_infinity, radial_integral, unit_sphere_area, BallRule};
pub use flow::{flow, flow_composed, TangentState};
pub use model::{Coefficients, Mode, ModelSpec, Radial, RegularityDecl};
pub use truncation::{mollified_indicator, mollified_indicator_value, Bump};

/// Cap on the number of lifted coordinates of a path.
pub const COORDINATE_CAP: usize = 64;

/// Simulation parameters shared by every path of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t: f64,
    /// Truncation level `M ≥ 1`.
    pub m: f64,
    /// Jet order `K`; zero simulates values only.
    pub jet_order: usize,
    /// RK4 step bound; defaults to `t / 1000`.
    pub h_max: Option<f64>,
    /// Radius of the ball on which Poisson points are drawn (`≥ M + 1`).
    /// Larger radii let two truncation levels share one Poisson measure.
    pub sampling_radius: Option<f64>,
    /// Lift ghost amplitudes as coordinates (they carry zero weight).
    pub lift_ghosts: bool,
    /// Panels and nodes per panel of the fixed rule for `θ_M`.
    pub theta_panels: usize,
    pub theta_nodes: usize,
}

impl SimConfig {
    pub fn new(t: f64, m: f64, jet_order: usize) -> Self {
        SimConfig {
            t,
            m,
            jet_order,
            h_max: None,
            sampling_radius: None,
            lift_ghosts: false,
            theta_panels: 8,
            theta_nodes: 12,
        }
    }

    pub fn h_max(&self) -> f64 {
        self.h_max.unwrap_or(self.t * 1e-3)
    }
}

/// One jump of the skeleton: accepted amplitudes and ghosts alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub z: Vec<f64>,
    pub ghost: bool,
    pub x_pre: Vec<f64>,
    pub x_post: Vec<f64>,
}

/// All randomness of one path and the resulting trajectory values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub seed: u64,
    pub index: u64,
    pub t: f64,
    pub lambda: f64,
    pub delta: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    /// Poisson points drawn outside `B_{M+1}` (only with a larger sampling radius).
    pub discarded: usize,
    pub x_t: Vec<f64>,
}

impl PathRecord {
    /// `J_t^M`, ghosts included.
    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn real_jumps(&self) -> usize {
        self.jumps.iter().filter(|j| !j.ghost).count()
    }
}

/// A path replayed on jets over its lifted coordinates.
#[derive(Debug, Clone)]
pub struct PathJets {
    pub space: Arc<JetSpace>,
    pub coords: Vec<CoordinateId>,
    pub weights: WeightField,
    pub delta: Vec<Jet>,
    pub x_t: Vec<Jet>,
    pub log_density: Jet,
    /// First variable of each jump's block, `None` when not lifted.
    pub jump_vars: Vec<Option<usize>>,
}

/// Counter-based generator for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `μ(B_R)` from the closed form when declared, else by quadrature.
pub fn mu_ball(model: &ModelSpec, radius: f64) -> Result<f64> {
    match &model.mu_ball {
        Some(f) => Ok(f(radius)),
        None => {
            let h = model.h.clone();
            radial_integral(model.d, move |r| h(r), 0.0, radius, 1e-13)
        }
    }
}

pub(crate) fn tail_integral(model: &ModelSpec, f: impl Fn(f64) -> f64, from: f64) -> Result<f64> {
    let h = model.h.clone();
    let g = move |r: f64| f(r) * h(r) * r.powi(model.d as i32 - 1);
    let from = from.max(0.0);
    let scale = crate::quadrature::integrate(&g, from, from + 1.0, 1e-300, 1e-12)?.abs();
    let tol = (1e-14 * scale.min(1.0)).max(1e-300);
    Ok(unit_sphere_area(model.d) * integrate_to_infinity(g, from, 1.0, tol, 1e-12)?)
}

/// `U_M(t) = t ∫_{B_{M-1}^c} c̲² γ̲ dμ`.
pub fn u_m(model: &ModelSpec, m: f64, t: f64) -> Result<f64> {
    let (cl, gl) = (model.c_low.clone(), model.gamma_low.clone());
    Ok(t * tail_integral(model, move |r| cl(r).powi(2) * gl(r), m - 1.0)?)
}

/// Gronwall constant: the declared value, else
/// `∫ c̄ γ̄ dμ + γ̄^{x,1} ∫ c̄ dμ + Lip(g)`.
pub fn gronwall_constant(model: &ModelSpec) -> Result<f64> {
    if let Some(c) = model.lipschitz {
        return Ok(c);
    }
    let (cb, gb) = (model.c_bar.clone(), model.gamma_bar.clone());
    let a = tail_integral(model, move |r| cb(r) * gb(r), 0.0)?;
    let cb = model.c_bar.clone();
    let b = tail_integral(model, move |r| cb(r), 0.0)?;
    Ok(a + model.gamma_x_lip * b + model.drift_lip)
}

/// `ε_M = t e^{Ct} ∫_{|z| > M} c̄ γ̄ dμ`.
pub fn truncation_error(model: &ModelSpec, m: f64, t: f64) -> Result<f64> {
    let c = gronwall_constant(model)?;
    let (cb, gb) = (model.c_bar.clone(), model.gamma_bar.clone());
    Ok(t * (c * t).exp() * tail_integral(model, move |r| cb(r) * gb(r), m)?)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Precomputed per-run state and the path simulator.
pub struct Simulator {
    model: ModelSpec,
    cfg: SimConfig,
    mu: f64,
    lambda: f64,
    sample_radius: f64,
    lambda_sample: f64,
    theta_rule: Option<(Vec<Vec<f64>>, Vec<f64>)>,
    bump: Bump,
    z_star: Vec<f64>,
    variance: f64,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("model", &self.model.name)
            .field("cfg", &self.cfg)
            .field("lambda", &self.lambda)
            .field("variance", &self.variance)
            .finish()
    }
}

impl Simulator {
    pub fn new(model: ModelSpec, cfg: SimConfig) -> Result<Simulator> {
        model.validate()?;
        if !(cfg.t > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", cfg.t)));
        }
        if !(cfg.m >= 1.0) {
            return Err(Error::Config(format!("M must be at least 1, got {}", cfg.m)));
        }
        let d = model.d;
        let r = cfg.m + 1.0;
        let (mu, lambda) = if model.has_jumps() {
            let mu = mu_ball(&model, r)?;
            (mu, 2.0 * model.c_sup * mu)
        } else {
            (0.0, 0.0)
        };
        let sample_radius = cfg.sampling_radius.unwrap_or(r);
        if sample_radius < r {
            return Err(Error::Config(format!(
                "sampling radius {sample_radius} is below M + 1 = {r}"
            )));
        }
        let lambda_sample = if model.has_jumps() {
            2.0 * model.c_sup * mu_ball(&model, sample_radius)?
        } else {
            0.0
        };
        if cfg.jet_order >= 1 {
            let lt = lambda * cfg.t;
            let jmax = (lt + 6.0 * lt.sqrt()).ceil() as usize;
            if d * (jmax + 1) > COORDINATE_CAP {
                return Err(Error::CoordinateBudgetExceeded {
                    requested: d * (jmax + 1),
                    cap: COORDINATE_CAP,
                });
            }
        }
        let probe = Jet::local_variables(&JetSpace::get(d, 0)?, &model.x0);
        let theta_rule = if model.has_jumps() && model.coeffs.gamma_mass(&probe, r, mu).is_none() {
            let rule = BallRule::new(d, r, cfg.theta_panels, cfg.theta_nodes)?;
            let w = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(z, w)| w * (model.h)(norm(z)))
                .collect();
            Some((rule.nodes, w))
        } else {
            None
        };
        let mut z_star = vec![0.0; d];
        z_star[0] = cfg.m + 3.0;
        let variance = match model.variance {
            Some(v) => v,
            None => u_m(&model, cfg.m, cfg.t)?,
        };
        Ok(Simulator {
            bump: Bump::new(d)?,
            model,
            cfg,
            mu,
            lambda,
            sample_radius,
            lambda_sample,
            theta_rule,
            z_star,
            variance,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// `λ_M = 2 C̄ μ(B_{M+1})`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `μ(B_{M+1})`.
    pub fn mu_ball(&self) -> f64 {
        self.mu
    }

    /// Variance of the Gaussian regularizer (`U_M(t)` unless overridden).
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn z_star(&self) -> &[f64] {
        &self.z_star
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    fn local_x(&self, x: &[Jet]) -> Result<(Arc<JetSpace>, Vec<Jet>)> {
        let order = x.iter().map(Jet::order).min().unwrap();
        let s = JetSpace::get(x.len(), order)?;
        let vals: Vec<f64> = x.iter().map(Jet::value).collect();
        let xs = Jet::local_variables(&s, &vals);
        Ok((s, xs))
    }

    fn theta_local(&self, xs: &[Jet]) -> Result<Jet> {
        let s = xs[0].space().clone();
        let r = self.cfg.m + 1.0;
        let mass = match &self.theta_rule {
            None => self
                .model
                .coeffs
                .gamma_mass(xs, r, self.mu)
                .expect("closed-form rate mass")?,
            Some((nodes, weights)) => {
                let mut acc = Jet::constant(&s, 0.0);
                for (z, w) in nodes.iter().zip(weights) {
                    let zs: Vec<Jet> = z.iter().map(|&v| Jet::constant(&s, v)).collect();
                    acc = acc + self.model.coeffs.gamma(&zs, xs)? * *w;
                }
                acc
            }
        };
        Ok((mass * (-1.0 / (2.0 * self.model.c_sup * self.mu))).add_scalar(1.0))
    }

    /// `θ_{M,γ}(x)`, differentiable in `x`.
    pub fn theta_m(&self, x: &[Jet]) -> Result<Jet> {
        if !self.model.has_jumps() {
            return Ok(Jet::constant(x[0].space(), 1.0));
        }
        let (_, xs) = self.local_x(x)?;
        Ok(Jet::compose(&self.theta_local(&xs)?, x))
    }

    fn ln_real_norm(&self) -> f64 {
        (2.0 * self.model.c_sup * self.mu).ln()
    }

    /// `ln q_M(z, x)` on the branch that contains `z`.
    pub fn q_m_logdensity(&self, z: &[Jet], x: &[Jet]) -> Result<Jet> {
        let zv: Vec<f64> = z.iter().map(Jet::value).collect();
        if norm(&zv) < self.cfg.m + 1.0 {
            let lg = self.model.coeffs.ln_gamma(z, x)?;
            let lh = self.model.coeffs.ln_h(z)?;
            return Ok((lg + lh) - self.ln_real_norm());
        }
        let w: Vec<Jet> = z.iter().zip(&self.z_star).map(|(a, b)| a - *b).collect();
        let wv: Vec<f64> = w.iter().map(Jet::value).collect();
        if norm(&wv) < 1.0 {
            let th = self.theta_m(x)?;
            return Ok(self.bump.ln_density(&w)? + th.ln()?);
        }
        Err(Error::OutsideSupport)
    }

    /// `c_M(z, x) = c(z, x) Φ_M(z)`.
    pub fn c_m(&self, z: &[Jet], x: &[Jet]) -> Result<Vec<Jet>> {
        let phi = mollified_indicator(z, self.cfg.m)?;
        Ok(self
            .model
            .coeffs
            .c(z, x)?
            .into_iter()
            .map(|c| c * &phi)
            .collect())
    }

    fn sample_h<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R) -> Result<Vec<f64>> {
        for _ in 0..1_000_000 {
            let z = truncation::uniform_ball(self.model.d, radius, rng);
            let accept = (self.model.h)(norm(&z)) / self.model.h_sup;
            if rng.random::<f64>() < accept {
                return Ok(z);
            }
        }
        Err(Error::Sampler("rejection from h exhausted".into()))
    }

    fn draw_point<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let z = self.sample_h(radius, rng)?;
        let u = 2.0 * self.model.c_sup * rng.random::<f64>();
        let w = self.bump.sample(rng)?;
        Ok((z, u, w))
    }

    fn gamma_value(&self, z: &[f64], x: &[f64]) -> Result<f64> {
        let s = JetSpace::get(0, 0)?;
        let zs: Vec<Jet> = z.iter().map(|&v| Jet::constant(&s, v)).collect();
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(&s, v)).collect();
        let g = self.model.coeffs.gamma(&zs, &xs)?.value();
        if !(-1e-12..=2.0 * self.model.c_sup * (1.0 + 1e-12)).contains(&g) {
            return Err(Error::Domain(format!(
                "rate {g} outside [0, 2C̄] with C̄ = {}",
                self.model.c_sup
            )));
        }
        Ok(g)
    }

    fn c_m_value(&self, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let s = JetSpace::get(0, 0)?;
        let zs: Vec<Jet> = z.iter().map(|&v| Jet::constant(&s, v)).collect();
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(&s, v)).collect();
        Ok(self.c_m(&zs, &xs)?.iter().map(Jet::value).collect())
    }

    /// Draws from `q_M(·, x)`: an amplitude in `B_{M+1}` with probability
    /// `γ / (2C̄)`, else a ghost around `z*_M`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<(Vec<f64>, bool)> {
        let (z, u, w) = self.draw_point(self.cfg.m + 1.0, rng)?;
        if u < self.gamma_value(&z, x)? {
            Ok((z, false))
        } else {
            Ok((self.z_star.iter().zip(&w).map(|(a, b)| a + b).collect(), true))
        }
    }

    fn flow_values(&self, x: &[f64], dt: f64) -> Result<Vec<f64>> {
        let s = JetSpace::get(0, 0)?;
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(&s, v)).collect();
        Ok(flow_composed(&xs, dt, &*self.model.coeffs, self.cfg.h_max())?
            .iter()
            .map(Jet::value)
            .collect())
    }

    /// Samples the skeleton of path `index` and its trajectory values.
    pub fn simulate_path(&self, seed: u64, index: u64) -> Result<PathRecord> {
        let mut rng = path_rng(seed, index);
        let d = self.model.d;
        let delta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.model.x0.clone();
        let mut last = 0.0;
        let mut time = 0.0;
        let mut jumps = Vec::new();
        let mut discarded = 0;
        let r = self.cfg.m + 1.0;
        if self.lambda_sample > 0.0 {
            loop {
                let e: f64 = rng.sample(Exp1);
                time += e / self.lambda_sample;
                if time > self.cfg.t {
                    break;
                }
                let (z, u, w) = self.draw_point(self.sample_radius, &mut rng)?;
                if norm(&z) >= r {
                    discarded += 1;
                    continue;
                }
                x = self.flow_values(&x, time - last)?;
                last = time;
                let ghost = u >= self.gamma_value(&z, &x)?;
                let x_pre = x.clone();
                let z = if ghost {
                    self.z_star.iter().zip(&w).map(|(a, b)| a + b).collect()
                } else {
                    let c = self.c_m_value(&z, &x)?;
                    for (xi, ci) in x.iter_mut().zip(c) {
                        *xi += ci;
                    }
                    z
                };
                jumps.push(JumpRecord {
                    time,
                    z,
                    ghost,
                    x_pre,
                    x_post: x.clone(),
                });
            }
        }
        x = self.flow_values(&x, self.cfg.t - last)?;
        Ok(PathRecord {
            seed,
            index,
            t: self.cfg.t,
            lambda: self.lambda,
            delta,
            jumps,
            discarded,
            x_t: x,
        })
    }

    /// Replays a skeleton on jets of order `order` over its lifted coordinates.
    pub fn lift(&self, rec: &PathRecord, order: usize) -> Result<PathJets> {
        let d = self.model.d;
        let lifted: Vec<bool> = rec
            .jumps
            .iter()
            .map(|j| !j.ghost || self.cfg.lift_ghosts)
            .collect();
        let n = d * (1 + lifted.iter().filter(|&&l| l).count());
        if order >= 1 && n > COORDINATE_CAP {
            return Err(Error::CoordinateBudgetExceeded {
                requested: n,
                cap: COORDINATE_CAP,
            });
        }
        let space = JetSpace::get(n, order)?;
        let mut coords: Vec<CoordinateId> = (0..d).map(CoordinateId::gaussian).collect();
        let delta: Vec<Jet> = (0..d)
            .map(|r| Jet::variable(&space, r, rec.delta[r]))
            .collect();
        let mut pi: Vec<Jet> = (0..d).map(|_| Jet::constant(&space, 1.0)).collect();
        let mut ln_p = (delta.iter().map(|v| v * v).fold(Jet::constant(&space, 0.0), |a, b| a + b)
            * -0.5)
            - 0.5 * d as f64 * (2.0 * PI).ln();
        let mut x: Vec<Jet> = self
            .model
            .x0
            .iter()
            .map(|&v| Jet::constant(&space, v))
            .collect();
        let mut last = 0.0;
        let mut jump_vars = Vec::with_capacity(rec.jumps.len());
        let mut next_var = d;
        let h_max = self.cfg.h_max();
        let coeffs = &*self.model.coeffs;
        for (k, (j, &lift)) in rec.jumps.iter().zip(&lifted).enumerate() {
            x = flow_composed(&x, j.time - last, coeffs, h_max)?;
            last = j.time;
            let z: Vec<Jet> = if lift {
                jump_vars.push(Some(next_var));
                let zs = (0..d)
                    .map(|r| {
                        coords.push(CoordinateId::jump(k + 1, r));
                        Jet::variable(&space, next_var + r, j.z[r])
                    })
                    .collect();
                next_var += d;
                zs
            } else {
                jump_vars.push(None);
                j.z.iter().map(|&v| Jet::constant(&space, v)).collect()
            };
            if j.ghost {
                let w: Vec<Jet> = z.iter().zip(&self.z_star).map(|(a, b)| a - *b).collect();
                ln_p = ln_p + self.bump.ln_density(&w)?;
                let (_, xs) = self.local_x(&x)?;
                ln_p = ln_p + Jet::compose(&self.theta_local(&xs)?.ln()?, &x);
                if lift {
                    pi.extend((0..d).map(|_| Jet::constant(&space, 0.0)));
                }
            } else {
                let ls = JetSpace::get(2 * d, order)?;
                let mut vals = j.z.clone();
                vals.extend(x.iter().map(Jet::value));
                let loc = Jet::local_variables(&ls, &vals);
                let (zl, xl) = loc.split_at(d);
                let mut outs = self.c_m(zl, xl)?;
                let lg = coeffs.ln_gamma(zl, xl)?;
                outs.push(lg + coeffs.ln_h(zl)? - self.ln_real_norm());
                let mut inputs = z.clone();
                inputs.extend(x.iter().cloned());
                let composed = Jet::compose_many(&outs, &inputs);
                x = x.iter().zip(&composed[..d]).map(|(a, b)| a + b).collect();
                ln_p = ln_p + &composed[d];
                let zs = JetSpace::get(d, order)?;
                let phi = mollified_indicator(&Jet::local_variables(&zs, &j.z), self.cfg.m)?;
                let phi = Jet::compose(&phi, &z);
                pi.extend((0..d).map(|_| phi.clone()));
            }
        }
        x = flow_composed(&x, rec.t - last, coeffs, h_max)?;
        Ok(PathJets {
            space,
            coords,
            weights: WeightField { pi },
            delta,
            x_t: x,
            log_density: ln_p,
            jump_vars,
        })
    }

    /// `F_M = X̄_t + √U Δ`.
    pub fn regularize(path: &PathJets, variance: f64) -> Vec<Jet> {
        let s = variance.sqrt();
        path.x_t
            .iter()
            .zip(&path.delta)
            .map(|(x, dl)| x + &(dl * s))
            .collect()
    }

    /// Tangent flows along a recorded path, with the per-jump data needed to
    /// reconstruct `∂_{Z̄_k} X̄_t`.
    pub fn tangent_flows(&self, rec: &PathRecord) -> Result<FlowMatrices> {
        let coeffs = &*self.model.coeffs;
        let h_max = self.cfg.h_max();
        let d = self.model.d;
        let mut st = TangentState::identity(&self.model.x0);
        let mut last = 0.0;
        let mut at_jumps = Vec::with_capacity(rec.jumps.len());
        let s1 = JetSpace::get(2 * d, 1)?;
        for (k, j) in rec.jumps.iter().enumerate() {
            st.advance(coeffs, j.time - last, h_max)?;
            last = j.time;
            if j.ghost {
                at_jumps.push(None);
                continue;
            }
            let mut vals = j.z.clone();
            vals.extend_from_slice(&j.x_pre);
            let loc = Jet::local_variables(&s1, &vals);
            let (zl, xl) = loc.split_at(d);
            let c = self.c_m(zl, xl)?;
            let mut ax = nalgebra::DMatrix::zeros(d, d);
            let mut az = nalgebra::DMatrix::zeros(d, d);
            for r in 0..d {
                for q in 0..d {
                    az[(r, q)] = c[r].partial(&[q])?;
                    ax[(r, q)] = c[r].partial(&[d + q])?;
                }
            }
            let new_x: Vec<f64> = st.x.iter().zip(&c).map(|(a, b)| a + b.value()).collect();
            st.jump(&ax, &new_x, k + 1)?;
            at_jumps.push(Some((st.y_hat.clone(), az)));
        }
        st.advance(coeffs, rec.t - last, h_max)?;
        Ok(FlowMatrices {
            y: st.y,
            y_hat: st.y_hat,
            x_t: st.x,
            at_jumps,
        })
    }
}

/// Tangent flow `Y_t`, its inverse, and per accepted jump the pair
/// `(Ŷ_{T_k}, ∇_z c_M(Z̄_k, X̄_{T_k-}))`.
#[derive(Debug, Clone)]
pub struct FlowMatrices {
    pub y: nalgebra::DMatrix<f64>,
    pub y_hat: nalgebra::DMatrix<f64>,
    pub x_t: Vec<f64>,
    pub at_jumps: Vec<Option<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)>>,
}

impl FlowMatrices {
    /// `Y_t Ŷ_{T_k} ∇_z c_M` for jump `k` (zero based), `None` for ghosts.
    pub fn amplitude_sensitivity(&self, k: usize) -> Option<nalgebra::DMatrix<f64>> {
        self.at_jumps[k]
            .as_ref()
            .map(|(yh, az)| &self.y * yh * az)
    }
}
