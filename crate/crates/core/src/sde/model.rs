use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Radial profile `r ↦ f(r)` with `r = |z|`.
pub type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Model coefficients evaluated on jets.
///
/// `z` and `x` are vectors of length `d`; the jets may live in any space
/// (the simulator evaluates them on small local spaces and composes).
pub trait Coefficients: Send + Sync {
    /// Jump amplitude `c(z, x)`.
    fn c(&self, z: &[Jet], x: &[Jet]) -> Result<Vec<Jet>>;
    /// Jump rate `γ(z, x)`.
    fn gamma(&self, z: &[Jet], x: &[Jet]) -> Result<Jet>;
    /// `ln γ(z, x)`.
    fn ln_gamma(&self, z: &[Jet], x: &[Jet]) -> Result<Jet> {
        self.gamma(z, x)?.ln()
    }
    /// Drift `g(x)`; `None` when `g ≡ 0`.
    fn drift(&self, _x: &[Jet]) -> Option<Vec<Jet>> {
        None
    }
    /// `ln h(z)` where `μ(dz) = h(z) dz`.
    fn ln_h(&self, z: &[Jet]) -> Result<Jet>;
    /// `∫_{B_R} γ(z, x) μ(dz)` in closed form, when available; `mu_ball`
    /// is `μ(B_R)`.
    fn gamma_mass(&self, _x: &[Jet], _radius: f64, _mu_ball: f64) -> Option<Result<Jet>> {
        None
    }
}

/// Declared data for the regularity calculator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityDecl {
    /// Broadness exponent; `f64::INFINITY` when infinite.
    pub theta: f64,
    pub p1: f64,
    pub p2: f64,
    pub rho: f64,
    pub mode: Mode,
}

/// Strength of the state dependence of the jump rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `∇_x ln γ` integrable in `z`.
    A,
    /// `∇_x ln γ` bounded.
    B,
}

/// A jump SDE: coefficients, reference measure and bound functions.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub d: usize,
    pub x0: Vec<f64>,
    pub coeffs: Arc<dyn Coefficients>,
    /// `C̄ = sup γ`; zero disables jumps.
    pub c_sup: f64,
    /// Radial density `h` of `μ`.
    pub h: Radial,
    /// Upper bound of `h` on every ball (used for rejection sampling).
    pub h_sup: f64,
    /// Closed form of `μ(B_R)` when known.
    pub mu_ball: Option<Radial>,
    pub c_bar: Radial,
    pub c_low: Radial,
    pub gamma_bar: Radial,
    pub gamma_low: Radial,
    /// Bound on `|∇_x γ|` (the constant `γ̄^{x,1}`).
    pub gamma_x_lip: f64,
    /// Lipschitz constant of the drift.
    pub drift_lip: f64,
    /// Declared Gronwall constant; computed from the bounds when absent.
    pub lipschitz: Option<f64>,
    /// Fixed variance of the Gaussian regularizer, overriding `U_M(t)`.
    pub variance: Option<f64>,
    pub regularity: Option<RegularityDecl>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("x0", &self.x0)
            .field("c_sup", &self.c_sup)
            .field("variance", &self.variance)
            .finish()
    }
}

impl ModelSpec {
    pub fn has_jumps(&self) -> bool {
        self.c_sup > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if self.x0.len() != self.d {
            return Err(Error::Config(format!(
                "x0 has {} entries for d = {}",
                self.x0.len(),
                self.d
            )));
        }
        if self.c_sup < 0.0 || !self.c_sup.is_finite() {
            return Err(Error::Config(format!("invalid C̄ = {}", self.c_sup)));
        }
        if let Some(v) = self.variance {
            if v < 0.0 {
                return Err(Error::Config(format!("negative variance {v}")));
            }
        }
        Ok(())
    }
}

/// `Σ_r a_r²` for a vector of jets.
pub fn norm_sq(v: &[Jet]) -> Jet {
    let mut acc = &v[0] * &v[0];
    for j in &v[1..] {
        acc = acc + j * j;
    }
    acc
}
