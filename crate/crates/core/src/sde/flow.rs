use nalgebra::DMatrix;

use super::model::Coefficients;
use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

/// Number of RK4 steps and the step length for an interval of length `dt`.
pub fn rk4_steps(dt: f64, h_max: f64) -> (usize, f64) {
    if dt <= 0.0 {
        return (0, 0.0);
    }
    let n = (dt / h_max).ceil().max(1.0) as usize;
    (n, dt / n as f64)
}

fn axpy(x: &[Jet], a: f64, k: &[Jet]) -> Vec<Jet> {
    x.iter().zip(k).map(|(xi, ki)| xi + &(ki * a)).collect()
}

/// Classical RK4 flow `Ψ_dt(x)` of `dx/ds = g(x)`, with jets carried
/// through every stage.
pub fn flow(x: &[Jet], dt: f64, coeffs: &dyn Coefficients, h_max: f64) -> Vec<Jet> {
    let mut state = x.to_vec();
    if coeffs.drift(x).is_none() {
        return state;
    }
    let (n, h) = rk4_steps(dt, h_max);
    for _ in 0..n {
        let k1 = coeffs.drift(&state).unwrap();
        let k2 = coeffs.drift(&axpy(&state, 0.5 * h, &k1)).unwrap();
        let k3 = coeffs.drift(&axpy(&state, 0.5 * h, &k2)).unwrap();
        let k4 = coeffs.drift(&axpy(&state, h, &k3)).unwrap();
        state = state
            .iter()
            .enumerate()
            .map(|(r, s)| {
                let inc = &k1[r] + &(&k2[r] * 2.0) + &(&k3[r] * 2.0) + &k4[r];
                s + &(inc * (h / 6.0))
            })
            .collect();
    }
    state
}

/// Same map as [`flow`], computed on a local `d`-variable expansion around
/// the current value and composed into the space of `x`.
pub fn flow_composed(
    x: &[Jet],
    dt: f64,
    coeffs: &dyn Coefficients,
    h_max: f64,
) -> Result<Vec<Jet>> {
    if dt <= 0.0 || coeffs.drift(x).is_none() {
        return Ok(x.to_vec());
    }
    let order = x.iter().map(Jet::order).min().unwrap();
    let local = JetSpace::get(x.len(), order)?;
    let values: Vec<f64> = x.iter().map(Jet::value).collect();
    let out = flow(&Jet::local_variables(&local, &values), dt, coeffs, h_max);
    Ok(Jet::compose_many(&out, x))
}

/// Drift value and Jacobian at a point.
pub fn drift_jacobian(coeffs: &dyn Coefficients, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = x.len();
    let s = JetSpace::get(d, 1)?;
    let xs = Jet::local_variables(&s, x);
    match coeffs.drift(&xs) {
        None => Ok((vec![0.0; d], DMatrix::zeros(d, d))),
        Some(g) => {
            let mut jac = DMatrix::zeros(d, d);
            for (r, gr) in g.iter().enumerate() {
                for c in 0..d {
                    jac[(r, c)] = gr.partial(&[c])?;
                }
            }
            Ok((g.iter().map(Jet::value).collect(), jac))
        }
    }
}

/// State together with the tangent flow `Y` and its inverse `Ŷ`.
#[derive(Debug, Clone)]
pub struct TangentState {
    pub x: Vec<f64>,
    pub y: DMatrix<f64>,
    pub y_hat: DMatrix<f64>,
}

impl TangentState {
    pub fn identity(x: &[f64]) -> Self {
        let d = x.len();
        TangentState {
            x: x.to_vec(),
            y: DMatrix::identity(d, d),
            y_hat: DMatrix::identity(d, d),
        }
    }

    /// RK4 on `x' = g(x)`, `Y' = ∇g Y`, `Ŷ' = -Ŷ ∇g` over `dt`.
    pub fn advance(&mut self, coeffs: &dyn Coefficients, dt: f64, h_max: f64) -> Result<()> {
        let x = self.x.clone();
        if coeffs.drift(&Jet::local_variables(&JetSpace::get(x.len(), 0)?, &x)).is_none() {
            return Ok(());
        }
        let (n, h) = rk4_steps(dt, h_max);
        let rhs = |s: &TangentState| -> Result<TangentState> {
            let (g, jac) = drift_jacobian(coeffs, &s.x)?;
            Ok(TangentState {
                x: g,
                y: &jac * &s.y,
                y_hat: -(&s.y_hat * &jac),
            })
        };
        let shift = |s: &TangentState, a: f64, k: &TangentState| TangentState {
            x: s.x.iter().zip(&k.x).map(|(u, v)| u + a * v).collect(),
            y: &s.y + &k.y * a,
            y_hat: &s.y_hat + &k.y_hat * a,
        };
        for _ in 0..n {
            let k1 = rhs(self)?;
            let k2 = rhs(&shift(self, 0.5 * h, &k1))?;
            let k3 = rhs(&shift(self, 0.5 * h, &k2))?;
            let k4 = rhs(&shift(self, h, &k3))?;
            for r in 0..self.x.len() {
                self.x[r] += h / 6.0 * (k1.x[r] + 2.0 * k2.x[r] + 2.0 * k3.x[r] + k4.x[r]);
            }
            self.y += (&k1.y + &k2.y * 2.0 + &k3.y * 2.0 + &k4.y) * (h / 6.0);
            self.y_hat += (&k1.y_hat + &k2.y_hat * 2.0 + &k3.y_hat * 2.0 + &k4.y_hat) * (h / 6.0);
        }
        Ok(())
    }

    /// Applies a jump with state Jacobian `a = ∇_x c_M`.
    pub fn jump(&mut self, a: &DMatrix<f64>, new_x: &[f64], index: usize) -> Result<()> {
        let d = self.x.len();
        let m = DMatrix::identity(d, d) + a;
        let inv = m
            .clone()
            .try_inverse()
            .filter(|_| m.determinant().abs() > 1e-12)
            .ok_or(Error::NonInvertibleJump { jump: index })?;
        self.y = &m * &self.y;
        self.y_hat = &self.y_hat * inv;
        self.x = new_x.to_vec();
        Ok(())
    }
}
