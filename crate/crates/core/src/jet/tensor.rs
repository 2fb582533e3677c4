use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Jet, JetSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoordKind {
    Gaussian,
    Jump,
}

/// Label of one random coordinate of a path: the Gaussian block (`k = 0`)
/// or the amplitude of jump `k >= 1`, component `r` (zero based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoordinateId {
    pub kind: CoordKind,
    pub k: usize,
    pub r: usize,
}

impl CoordinateId {
    pub fn gaussian(r: usize) -> Self {
        CoordinateId {
            kind: CoordKind::Gaussian,
            k: 0,
            r,
        }
    }

    pub fn jump(k: usize, r: usize) -> Self {
        assert!(k >= 1, "jump coordinates start at k = 1");
        CoordinateId {
            kind: CoordKind::Jump,
            k,
            r,
        }
    }
}

/// Localizing weights π, one jet per variable of the space.
#[derive(Debug, Clone)]
pub struct WeightField {
    pub pi: Vec<Jet>,
}

impl WeightField {
    /// All weights identically one.
    pub fn unit(space: &Arc<JetSpace>) -> Self {
        WeightField {
            pi: (0..space.nvars())
                .map(|_| Jet::constant(space, 1.0))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// `D_i F = π_i ∂_i F` for every variable `i`.
pub fn weighted_gradient(f: &Jet, w: &WeightField) -> Result<Vec<Jet>> {
    if f.order() == 0 {
        return Err(Error::InsufficientOrder { needed: 1, have: 0 });
    }
    f.gradient()?
        .into_iter()
        .zip(&w.pi)
        .map(|(g, p)| Ok(p * &g))
        .collect()
}

/// Dense `D^k F` over all ordered multi-indices; the first index is the
/// first derivative applied.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTensor {
    pub k: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl DerivTensor {
    pub fn get(&self, alpha: &[usize]) -> f64 {
        assert_eq!(alpha.len(), self.k);
        let idx = alpha.iter().fold(0, |acc, &a| acc * self.n + a);
        self.data[idx]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn next_level(level: &[Jet], w: &WeightField) -> Result<Vec<Jet>> {
    let mut out = Vec::with_capacity(level.len() * w.len());
    for j in level {
        out.extend(weighted_gradient(j, w)?);
    }
    Ok(out)
}

/// Jets of `D^0 F, ..., D^l F`, each level flattened in multi-index order.
fn levels(f: &Jet, w: &WeightField, l: usize) -> Result<Vec<Vec<Jet>>> {
    if f.order() < l {
        return Err(Error::InsufficientOrder {
            needed: l,
            have: f.order(),
        });
    }
    let mut all = vec![vec![f.clone()]];
    for _ in 0..l {
        let next = next_level(all.last().unwrap(), w)?;
        all.push(next);
    }
    Ok(all)
}

fn level_norms(f: &Jet, w: &WeightField, l: usize) -> Result<Vec<f64>> {
    Ok(levels(f, w, l)?
        .iter()
        .map(|lv| lv.iter().map(|j| j.value().powi(2)).sum::<f64>().sqrt())
        .collect())
}

pub fn derive_tensor(f: &Jet, w: &WeightField, k: usize) -> Result<DerivTensor> {
    let lv = levels(f, w, k)?;
    Ok(DerivTensor {
        k,
        n: w.len(),
        data: lv[k].iter().map(Jet::value).collect(),
    })
}

/// `|F|_l = Σ_{k ≤ l} |D^k F|`, summed over the components of `f`.
pub fn sobolev_norm(f: &[Jet], w: &WeightField, l: usize) -> Result<f64> {
    let mut total = 0.0;
    for c in f {
        total += level_norms(c, w, l)?.iter().sum::<f64>();
    }
    Ok(total)
}

/// `|U|_l` of a simple process: the Frobenius norm of `D^k U` runs over the
/// process index as well.
pub fn sobolev_norm_process(u: &[Jet], w: &WeightField, l: usize) -> Result<f64> {
    let mut sq = vec![0.0; l + 1];
    for c in u {
        for (k, v) in level_norms(c, w, l)?.into_iter().enumerate() {
            sq[k] += v * v;
        }
    }
    Ok(sq.iter().map(|s| s.sqrt()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl InequalityMargin {
    fn new(lhs: f64, rhs: f64) -> Self {
        InequalityMargin {
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }
}

/// Both sides of the product and scalar-product norm inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    pub prod: InequalityMargin,
    pub scal_p: InequalityMargin,
    pub scal1: InequalityMargin,
    pub scal3: InequalityMargin,
}

impl MarginReport {
    pub fn min_margin(&self) -> f64 {
        [self.prod, self.scal_p, self.scal1, self.scal3]
            .iter()
            .map(|m| m.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest margin relative to the right-hand side.
    pub fn min_relative_margin(&self) -> f64 {
        [self.prod, self.scal_p, self.scal1, self.scal3]
            .iter()
            .map(|m| m.margin / m.rhs.abs().max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the four norm inequalities at level `l` with `U = DF`,
/// `V = DG` and `H = F + G`.
pub fn norm_inequality_margin(
    f: &Jet,
    g: &Jet,
    w: &WeightField,
    l: usize,
) -> Result<MarginReport> {
    let need = l + 1;
    for j in [f, g] {
        if j.order() < need {
            return Err(Error::InsufficientOrder {
                needed: need,
                have: j.order(),
            });
        }
    }
    let pow_l = 2f64.powi(l as i32);
    let nf = level_norms(f, w, need)?;
    let ng = level_norms(g, w, need)?;
    let full = |n: &[f64], k: usize| n[..=k].iter().sum::<f64>();
    let semi = |n: &[f64], k: usize| n[1..=k].iter().sum::<f64>();

    let fg = f * g;
    let lhs_prod = level_norms(&fg, w, l)?.iter().sum::<f64>();
    let mut rhs_prod = 0.0;
    for l1 in 0..=l {
        for l2 in 0..=(l - l1) {
            rhs_prod += full(&nf, l1) * full(&ng, l2);
        }
    }

    let df = weighted_gradient(f, w)?;
    let dg = weighted_gradient(g, w)?;
    let space = f.space();
    let inner = super::sum_owned(space, df.iter().zip(&dg).map(|(a, b)| a * b));
    let lhs_scal = level_norms(&inner, w, l)?.iter().sum::<f64>();
    let mut rhs_p = 0.0;
    let mut rhs_1 = 0.0;
    for l1 in 0..=l {
        for l2 in 0..=(l - l1) {
            rhs_p += sobolev_norm_process(&df, w, l1)? * sobolev_norm_process(&dg, w, l2)?;
            rhs_1 += semi(&nf, l1 + 1) * semi(&ng, l2 + 1);
        }
    }

    let h = f + g;
    let nh = level_norms(&h, w, l)?;
    let lhs_3 = level_norms(&(&h * &inner), w, l)?.iter().sum::<f64>();
    let mut rhs_3 = 0.0;
    for l1 in 0..=l {
        for l2 in 0..=(l - l1) {
            for l3 in 0..=(l - l1 - l2) {
                rhs_3 += semi(&nf, l1 + 1) * semi(&ng, l2 + 1) * full(&nh, l3);
            }
        }
    }

    Ok(MarginReport {
        prod: InequalityMargin::new(lhs_prod, pow_l * rhs_prod),
        scal_p: InequalityMargin::new(lhs_scal, pow_l * rhs_p),
        scal1: InequalityMargin::new(lhs_scal, pow_l * rhs_1),
        scal3: InequalityMargin::new(lhs_3, pow_l * pow_l * rhs_3),
    })
}
