//! Derivative, covariance, divergence, the operator `L` and the recursive
//! integration-by-parts weights on one realized path.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{sobolev_norm, sobolev_norm_process, weighted_gradient, Jet, WeightField};

/// One jet per coordinate of the path.
pub type SimpleProcess = Vec<Jet>;

/// `DF^r` for each component of `f`.
pub fn gradient(f: &[Jet], w: &WeightField) -> Result<Vec<SimpleProcess>> {
    f.iter().map(|c| weighted_gradient(c, w)).collect()
}

/// `⟨U, V⟩ = Σ_i U_i V_i`.
pub fn inner(u: &[Jet], v: &[Jet]) -> Jet {
    let mut acc = &u[0] * &v[0];
    for (a, b) in u.iter().zip(v).skip(1) {
        acc = acc + a * b;
    }
    acc
}

/// Malliavin covariance at the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    #[serde(skip)]
    pub sigma: DMatrix<f64>,
    pub det: f64,
    pub min_eigenvalue: f64,
}

impl CovarianceMatrix {
    pub fn from_matrix(sigma: DMatrix<f64>) -> Self {
        let det = sigma.determinant();
        let min_eigenvalue = SymmetricEigen::new(sigma.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        CovarianceMatrix {
            sigma,
            det,
            min_eigenvalue,
        }
    }

    /// `1e-12 (tr σ / d)^d`.
    pub fn threshold(&self) -> f64 {
        let d = self.sigma.nrows();
        1e-12 * (self.sigma.trace() / d as f64).powi(d as i32)
    }

    pub fn is_singular(&self) -> bool {
        !(self.det > self.threshold())
    }
}

/// `σ^{kk'} = ⟨DF^k, DF^{k'}⟩` as jets.
pub fn covariance_jets(df: &[SimpleProcess]) -> Vec<Vec<Jet>> {
    let d = df.len();
    let mut s: Vec<Vec<Jet>> = vec![Vec::with_capacity(d); d];
    for a in 0..d {
        for b in 0..d {
            let v = if b < a { s[b][a].clone() } else { inner(&df[a], &df[b]) };
            s[a].push(v);
        }
    }
    s
}

fn values(m: &[Vec<Jet>]) -> DMatrix<f64> {
    let d = m.len();
    DMatrix::from_fn(d, d, |i, j| m[i][j].value())
}

pub fn covariance(f: &[Jet], w: &WeightField) -> Result<CovarianceMatrix> {
    Ok(CovarianceMatrix::from_matrix(values(&covariance_jets(&gradient(f, w)?))))
}

/// `γ = σ^{-1}` at the sample.
pub fn inverse_covariance(c: &CovarianceMatrix) -> Result<DMatrix<f64>> {
    if c.is_singular() {
        return Err(Error::Singular {
            det: c.det,
            threshold: c.threshold(),
        });
    }
    c.sigma.clone().try_inverse().ok_or(Error::Singular {
        det: c.det,
        threshold: c.threshold(),
    })
}

/// `σ^{-1}` as jets, by Gauss–Jordan elimination with pivoting on values.
pub fn inverse_covariance_jets(sigma: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let c = CovarianceMatrix::from_matrix(values(sigma));
    if c.is_singular() {
        return Err(Error::Singular {
            det: c.det,
            threshold: c.threshold(),
        });
    }
    let d = sigma.len();
    if d == 1 {
        return Ok(vec![vec![sigma[0][0].recip()?]]);
    }
    let space = sigma[0][0].space().clone();
    let mut a: Vec<Vec<Jet>> = sigma.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| Jet::constant(&space, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].recip()?;
        for j in 0..d {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for i in 0..d {
            if i == col {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..d {
                a[i][j] = &a[i][j] - &(&f * &a[col][j]);
                inv[i][j] = &inv[i][j] - &(&f * &inv[col][j]);
            }
        }
    }
    Ok(inv)
}

fn is_zero(j: &Jet) -> bool {
    j.coeffs().iter().all(|&c| c == 0.0)
}

/// `δ(U) = -Σ_i (∂_i(π_i U_i) + U_i π_i ∂_i ln p)`.
pub fn divergence(u: &[Jet], w: &WeightField, ln_p: &Jet) -> Result<Jet> {
    if !ln_p.value().is_finite() {
        return Err(Error::DegenerateDensity);
    }
    assert_eq!(u.len(), w.len(), "process length differs from the coordinate count");
    let space = ln_p.space().clone();
    let mut acc: Option<Jet> = None;
    for (i, (ui, pi)) in u.iter().zip(&w.pi).enumerate() {
        if is_zero(ui) || is_zero(pi) {
            continue;
        }
        let pu = pi * ui;
        let term = pu.derivative(i)? + &pu * &ln_p.derivative(i)?;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    Ok(match acc {
        Some(a) => -a,
        None => {
            let order = u.iter().map(Jet::order).min().unwrap_or(0).min(ln_p.order());
            if order == 0 {
                return Err(Error::InsufficientOrder { needed: 1, have: 0 });
            }
            Jet::constant(&space, 0.0).truncate(order - 1)
        }
    })
}

/// `LF^r = δ(DF^r)`.
pub fn ou_operator(f: &[Jet], w: &WeightField, ln_p: &Jet) -> Result<Vec<Jet>> {
    gradient(f, w)?
        .iter()
        .map(|df| divergence(df, w, ln_p))
        .collect()
}

/// Per-path data shared by every weight `H_β(F, ·)`.
#[derive(Debug, Clone)]
pub struct IbpContext {
    pub df: Vec<SimpleProcess>,
    pub gamma: Vec<Vec<Jet>>,
    /// `(γ(F) DF)^r = Σ_{r'} γ^{r' r} DF^{r'}` for each `r`.
    pub v: Vec<SimpleProcess>,
    pub covariance: CovarianceMatrix,
}

impl IbpContext {
    pub fn new(f: &[Jet], w: &WeightField) -> Result<Self> {
        let df = gradient(f, w)?;
        let sigma = covariance_jets(&df);
        let covariance = CovarianceMatrix::from_matrix(values(&sigma));
        let gamma = inverse_covariance_jets(&sigma)?;
        let d = f.len();
        let n = w.len();
        let v = (0..d)
            .map(|r| {
                (0..n)
                    .map(|i| {
                        let mut acc = &gamma[0][r] * &df[0][i];
                        for rp in 1..d {
                            acc = acc + &gamma[rp][r] * &df[rp][i];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(IbpContext {
            df,
            gamma,
            v,
            covariance,
        })
    }

    /// `H_r(F, G) = δ(G (γ DF)^r)`.
    pub fn h(&self, r: usize, g: &Jet, w: &WeightField, ln_p: &Jet) -> Result<Jet> {
        let u: Vec<Jet> = self.v[r].iter().map(|vi| g * vi).collect();
        divergence(&u, w, ln_p)
    }

    /// Same weight through `G L^γ_r(F) - ⟨DG, (γ DF)^r⟩`.
    pub fn h_expanded(&self, r: usize, g: &Jet, w: &WeightField, ln_p: &Jet) -> Result<Jet> {
        let lg = divergence(&self.v[r], w, ln_p)?;
        let dg = weighted_gradient(g, w)?;
        Ok(g * &lg - inner(&dg, &self.v[r]))
    }

    /// `H_β^q(F, G) = H_{β_1}(F, H_{(β_2..β_q)}(F, G))`.
    pub fn weight(&self, g: &Jet, beta: &[usize], w: &WeightField, ln_p: &Jet) -> Result<Jet> {
        self.recurse(g, beta, w, ln_p, false)
    }

    /// [`IbpContext::weight`] with every level expanded.
    pub fn weight_expanded(&self, g: &Jet, beta: &[usize], w: &WeightField, ln_p: &Jet) -> Result<Jet> {
        self.recurse(g, beta, w, ln_p, true)
    }

    fn recurse(&self, g: &Jet, beta: &[usize], w: &WeightField, ln_p: &Jet, expanded: bool) -> Result<Jet> {
        let d = self.df.len();
        if let Some(&b) = beta.iter().find(|&&b| b >= d) {
            return Err(Error::Domain(format!("multi-index entry {b} outside 0..{d}")));
        }
        let q = beta.len();
        let k = self.df[0][0].order() + 1;
        if k < q + 1 || g.order() < q {
            return Err(Error::InsufficientOrder {
                needed: q + 1,
                have: k.min(g.order() + 1),
            });
        }
        let mut h = g.clone();
        for &r in beta.iter().rev() {
            h = if expanded {
                self.h_expanded(r, &h, w, ln_p)?
            } else {
                self.h(r, &h, w, ln_p)?
            };
        }
        Ok(h)
    }
}

/// `H_β^q(F, G)`; `β` holds zero-based component indices.
pub fn ibp_weight(f: &[Jet], g: &Jet, beta: &[usize], w: &WeightField, ln_p: &Jet) -> Result<Jet> {
    IbpContext::new(f, w)?.weight(g, beta, w, ln_p)
}

/// Sizes of the weight and of the structural factor of its a priori bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub q: usize,
    pub h_abs: f64,
    pub det: f64,
    pub g_norm: f64,
    pub f_norm: f64,
    pub lf_norm: f64,
    /// `|G|_q (1 + |F|_{q+1})^{(6d+1)q} det^{-(3q-1)} (1 + |LF|_{q-1}^q)`.
    pub structural_factor: f64,
    /// `|H| / structural_factor`.
    pub implied_constant: f64,
    /// Frobenius norm of `γ(F)`.
    pub gamma_norm: f64,
    /// `det^{-1} (1 + |F|_{1,1}^{2d})`.
    pub gamma_factor: f64,
}

/// Reports `|H_β^q(F, G)|` against the structure of its bound; needs jets
/// of order `q + 1`.
pub fn bound_report(f: &[Jet], g: &Jet, beta: &[usize], w: &WeightField, ln_p: &Jet) -> Result<BoundReport> {
    let q = beta.len();
    let d = f.len() as i32;
    let ctx = IbpContext::new(f, w)?;
    let h = ctx.weight(g, beta, w, ln_p)?;
    let det = ctx.covariance.det;
    let lf = ou_operator(f, w, ln_p)?;
    let g_norm = sobolev_norm(std::slice::from_ref(g), w, q)?;
    let f_norm = sobolev_norm(f, w, q + 1)?;
    let lf_norm = sobolev_norm(&lf, w, q.saturating_sub(1))?;
    let structural_factor = g_norm * (1.0 + f_norm).powi((6 * d + 1) * q as i32)
        / det.powi(3 * q as i32 - 1)
        * (1.0 + lf_norm.powi(q as i32));
    let df_norm: f64 = ctx
        .df
        .iter()
        .map(|c| sobolev_norm_process(c, w, 0))
        .sum::<Result<f64>>()?;
    let gamma_norm = ctx
        .gamma
        .iter()
        .flatten()
        .map(|j| j.value().powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(BoundReport {
        q,
        h_abs: h.value().abs(),
        det,
        g_norm,
        f_norm,
        lf_norm,
        structural_factor,
        implied_constant: h.value().abs() / structural_factor,
        gamma_norm,
        gamma_factor: (1.0 + df_norm.powi(2 * d)) / det,
    })
}

/// `|a - b|` relative to `scale` (floored at the smallest normal number).
pub fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}
