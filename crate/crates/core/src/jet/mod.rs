//! Truncated multivariate Taylor polynomials ("jets") and the π-weighted
//! derivative tensors built from them.

mod space;
mod tensor;

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

pub use space::{JetSpace, MAX_ORDER, MAX_VARS};
pub use tensor::{
    derive_tensor, norm_inequality_margin, sobolev_norm, sobolev_norm_process, weighted_gradient,
    CoordKind, CoordinateId, DerivTensor, InequalityMargin, MarginReport, WeightField,
};

use crate::error::{Error, Result};

/// A truncated Taylor expansion in the variables of a [`JetSpace`].
///
/// Coefficients are stored in Taylor normalization (the raw partial
/// derivative along a monomial equals the coefficient times the product of
/// exponent factorials). Trailing coefficients beyond `coeffs.len()` are zero,
/// so constants cost a single entry regardless of the order.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars())
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    /// Constant jet, exact at every order of the space.
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        Jet {
            space: space.clone(),
            order: space.order(),
            coeffs: vec![value],
        }
    }

    /// Identity jet of variable `var` evaluated at `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        let mut coeffs = vec![value];
        if space.order() >= 1 {
            assert!(var < space.nvars(), "variable {var} out of range");
            coeffs.resize(var + 2, 0.0);
            coeffs[var + 1] = 1.0;
        }
        Jet {
            space: space.clone(),
            order: space.order(),
            coeffs,
        }
    }

    /// Builds a jet from Taylor coefficients in the monomial order of `space`.
    pub fn from_coeffs(space: &Arc<JetSpace>, order: usize, mut coeffs: Vec<f64>) -> Jet {
        let order = order.min(space.order());
        coeffs.truncate(space.len(order));
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Stored Taylor coefficients; missing trailing entries are zero.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of monomial `i`.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Raw partial derivative along the multiset `vars`.
    pub fn partial(&self, vars: &[usize]) -> Result<f64> {
        if vars.len() > self.order {
            return Err(Error::InsufficientOrder {
                needed: vars.len(),
                have: self.order,
            });
        }
        if vars.is_empty() {
            return Ok(self.value());
        }
        let i = self
            .space
            .index_of(vars)
            .ok_or_else(|| Error::Domain(format!("no monomial for variables {vars:?}")))?;
        Ok(self.coeff(i) * self.space.factorial(i))
    }

    /// Same jet known only up to `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        Jet::from_coeffs(&self.space, order.min(self.order), self.coeffs.clone())
    }

    /// True when every coefficient above degree zero vanishes.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces"
        );
    }

    fn binary_add(&self, other: &Jet, sign: f64) -> Jet {
        self.same_space(other);
        let order = self.order.min(other.order);
        let cap = self.space.len(order);
        let n = self.coeffs.len().max(other.coeffs.len()).min(cap);
        let mut out = vec![0.0; n];
        for (o, &a) in out.iter_mut().zip(&self.coeffs) {
            *o = a;
        }
        for (o, &b) in out.iter_mut().zip(&other.coeffs) {
            *o += sign * b;
        }
        Jet {
            space: self.space.clone(),
            order,
            coeffs: out,
        }
    }

    fn nonzeros(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0.0).count()
    }

    fn top_degree(&self) -> usize {
        self.space.degree(self.coeffs.len() - 1)
    }

    fn binary_mul(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let order = self.order.min(other.order);
        if self.coeffs.len() == 1 {
            return other.truncate(order).scale(self.coeffs[0]);
        }
        if other.coeffs.len() == 1 {
            return self.truncate(order).scale(other.coeffs[0]);
        }
        let (a, b) = if self.nonzeros() <= other.nonzeros() {
            (self, other)
        } else {
            (other, self)
        };
        let space = &*self.space;
        let top = order.min(a.top_degree() + b.top_degree());
        let mut out = vec![0.0; space.len(top)];
        let lb = b.coeffs.len();
        let la = a.coeffs.len().min(space.len(top));
        for (ia, &x) in a.coeffs[..la].iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let bmax = lb.min(space.len(top - space.degree(ia)));
            for &(ib, ic) in space.mul_row(ia) {
                let ib = ib as usize;
                if ib >= bmax {
                    break;
                }
                out[ic as usize] += x * b.coeffs[ib];
            }
        }
        Jet {
            space: self.space.clone(),
            order,
            coeffs: out,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Composition `f(self)` given `derivs[k] = f^(k)(self.value())` for
    /// `k = 0..=self.order()`.
    pub fn compose_univariate(&self, derivs: &[f64]) -> Jet {
        let order = self.order;
        assert!(derivs.len() > order, "need {} derivatives", order + 1);
        if self.coeffs.len() == 1 || order == 0 {
            return Jet {
                space: self.space.clone(),
                order,
                coeffs: vec![derivs[0]],
            };
        }
        let mut du = self.clone();
        du.coeffs[0] = 0.0;
        let mut fact = 1.0;
        let mut taylor = Vec::with_capacity(order + 1);
        for (k, &d) in derivs[..=order].iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            taylor.push(d / fact);
        }
        let mut acc = Jet {
            space: self.space.clone(),
            order,
            coeffs: vec![taylor[order]],
        };
        for k in (0..order).rev() {
            acc = acc.binary_mul(&du).add_scalar(taylor[k]);
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose_univariate(&vec![e; self.order + 1])
    }

    pub fn ln(&self) -> Result<Jet> {
        let x = self.value();
        if x <= 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("ln of {x}")));
        }
        let mut d = vec![x.ln()];
        let mut c = 1.0;
        for k in 1..=self.order {
            d.push(c / x.powi(k as i32));
            c *= -(k as f64);
        }
        Ok(self.compose_univariate(&d))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose_univariate(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose_univariate(&d)
    }

    /// `self^p` for real `p`; requires a positive base unless `p` is a
    /// nonnegative integer.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let x = self.value();
        let integer = p >= 0.0 && p.fract() == 0.0;
        if !integer && (x < 0.0 || (x == 0.0 && self.order > 0 && !self.is_constant())) {
            return Err(Error::Domain(format!("{x}^{p}")));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut c = 1.0;
        for k in 0..=self.order {
            let e = p - k as f64;
            d.push(if c == 0.0 { 0.0 } else { c * x.powf(e) });
            c *= e;
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{x}^{p}")));
        }
        Ok(self.compose_univariate(&d))
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(&self.space, 1.0).truncate(self.order);
        for _ in 0..n {
            out = out.binary_mul(self);
        }
        out
    }

    pub fn sqrt(&self) -> Result<Jet> {
        if self.value() == 0.0 && self.is_constant() {
            return Ok(self.clone());
        }
        if self.value() <= 0.0 && self.order > 0 {
            return Err(Error::Domain(format!("sqrt of {}", self.value())));
        }
        self.powf(0.5)
    }

    pub fn recip(&self) -> Result<Jet> {
        let x = self.value();
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("reciprocal of {x}")));
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut c = 1.0;
        for k in 0..=self.order {
            d.push(c / x.powi(k as i32 + 1));
            c *= -(k as f64 + 1.0);
        }
        Ok(self.compose_univariate(&d))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.binary_mul(&other.recip()?))
    }

    pub fn tanh(&self) -> Jet {
        // d^k tanh / dx^k as polynomials in T = tanh(x)
        let t = self.value().tanh();
        let mut poly = vec![0.0, 1.0];
        let mut d = Vec::with_capacity(self.order + 1);
        for _ in 0..=self.order {
            d.push(poly.iter().rev().fold(0.0, |acc, &c| acc * t + c));
            let mut next = vec![0.0; poly.len() + 2];
            for (i, &c) in poly.iter().enumerate().skip(1) {
                let dc = c * i as f64;
                next[i - 1] += dc;
                next[i + 1] -= dc;
            }
            poly = next;
        }
        self.compose_univariate(&d)
    }

    /// Partial derivative in `var`, one order lower.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::InsufficientOrder { needed: 1, have: 0 });
        }
        let order = self.order - 1;
        let n = self.coeffs.len();
        let mut out = vec![0.0; self.space.len(order.min(self.top_degree().saturating_sub(1)))];
        if var < self.space.nvars() {
            for &(src, dst, e) in self.space.down(var) {
                let src = src as usize;
                if src >= n {
                    break;
                }
                out[dst as usize] += e * self.coeffs[src];
            }
        }
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs: out,
        })
    }

    /// All first partial derivatives.
    pub fn gradient(&self) -> Result<Vec<Jet>> {
        (0..self.space.nvars()).map(|v| self.derivative(v)).collect()
    }

    /// Substitutes `inputs` for the variables of `outer`.
    ///
    /// `outer` lives in a local space whose variables stand for
    /// `inputs[i] - inputs[i].value()`; the result is the composite
    /// expanded in the common space of `inputs`.
    pub fn compose(outer: &Jet, inputs: &[Jet]) -> Jet {
        Jet::compose_many(std::slice::from_ref(outer), inputs).pop().unwrap()
    }

    /// [`Jet::compose`] for several outer jets of one local space, sharing
    /// the monomial products of the inputs.
    pub fn compose_many(outers: &[Jet], inputs: &[Jet]) -> Vec<Jet> {
        assert!(!outers.is_empty() && !inputs.is_empty());
        let local = outers[0].space().clone();
        assert!(
            local.order() == 0 || inputs.len() == local.nvars(),
            "compose: {} inputs for {} variables",
            inputs.len(),
            local.nvars()
        );
        let target = inputs[0].space.clone();
        let in_order = inputs.iter().map(|j| j.order).min().unwrap();
        let orders: Vec<usize> = outers.iter().map(|o| o.order.min(in_order)).collect();
        let order = *orders.iter().max().unwrap();
        let du: Vec<Option<Jet>> = inputs
            .iter()
            .map(|j| {
                if j.coeffs.len() == 1 || order == 0 {
                    None
                } else {
                    let mut d = j.truncate(order);
                    d.coeffs[0] = 0.0;
                    Some(d)
                }
            })
            .collect();
        let n = outers
            .iter()
            .zip(&orders)
            .map(|(o, &k)| o.coeffs.len().min(local.len(k)))
            .max()
            .unwrap();
        let mut results: Vec<Jet> = outers
            .iter()
            .zip(&orders)
            .map(|(o, &k)| Jet {
                space: target.clone(),
                order: k,
                coeffs: vec![o.coeffs[0]],
            })
            .collect();
        let mut powers: Vec<Option<Jet>> = Vec::with_capacity(n);
        powers.push(Some(Jet::constant(&target, 1.0).truncate(order)));
        for i in 1..n {
            let (p, v) = local.parent(i);
            let prod = match (&powers[p], &du[v]) {
                (Some(a), Some(b)) => Some(a.binary_mul(b)),
                _ => None,
            };
            if let Some(pr) = &prod {
                for (res, o) in results.iter_mut().zip(outers) {
                    let c = o.coeff(i);
                    if c != 0.0 && local.degree(i) <= res.order {
                        *res = res.binary_add(&pr.scale(c), 1.0);
                    }
                }
            }
            powers.push(prod);
        }
        results
    }

    /// Lifts every variable of a local space at the given point.
    pub fn local_variables(space: &Arc<JetSpace>, values: &[f64]) -> Vec<Jet> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(space, i, v))
            .collect()
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                $body(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $body(&self, &rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                $body(&self, rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $body(self, &rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a: &Jet, b: &Jet| a.binary_add(b, 1.0));
jet_binop!(Sub, sub, |a: &Jet, b: &Jet| a.binary_add(b, -1.0));
jet_binop!(Mul, mul, |a: &Jet, b: &Jet| a.binary_mul(b));

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of jets, or the constant zero of `space` for an empty iterator.
pub fn sum<'a>(space: &Arc<JetSpace>, items: impl IntoIterator<Item = &'a Jet>) -> Jet {
    items
        .into_iter()
        .fold(Jet::constant(space, 0.0), |acc, j| acc.binary_add(j, 1.0))
}

/// Sum of owned jets, or the constant zero of `space` for an empty iterator.
pub fn sum_owned(space: &Arc<JetSpace>, items: impl IntoIterator<Item = Jet>) -> Jet {
    items
        .into_iter()
        .fold(Jet::constant(space, 0.0), |acc, j| acc.binary_add(&j, 1.0))
}

/// Identity jet of coordinate `coord` in the variable slot `var`.
pub fn jet_lift(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
    Jet::variable(space, var, value)
}

#[cfg(test)]
mod tests;
