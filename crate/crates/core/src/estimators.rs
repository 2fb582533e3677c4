//! Monte Carlo harness: expectations with standard errors, two-sided
//! duality and integration-by-parts checks, empirical characteristic
//! functions and 1-d densities through integration by parts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{weighted_gradient, Jet};
use crate::malliavin::{divergence, inner, IbpContext};
use crate::sde::{PathJets, PathRecord, Simulator};

/// Largest tolerated fraction of rejected (singular) paths.
pub const MAX_REJECTED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub rejected_paths: usize,
}

/// Two-sided estimate of one identity `E[lhs] = E[rhs]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpReport {
    pub beta: Vec<usize>,
    pub direct: McEstimate,
    pub weighted: McEstimate,
    pub z_score: f64,
}

impl IbpReport {
    pub fn new(beta: Vec<usize>, direct: McEstimate, weighted: McEstimate) -> Self {
        let se = (direct.standard_error.powi(2) + weighted.standard_error.powi(2)).sqrt();
        let gap = (direct.mean - weighted.mean).abs();
        let z_score = if se > 0.0 {
            gap / se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        IbpReport {
            beta,
            direct,
            weighted,
            z_score,
        }
    }

    pub fn passes(&self) -> bool {
        self.z_score <= 3.0
    }
}

/// Sum in a fixed binary tree order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Mean and standard error of `values`.
pub fn estimate(values: &[f64], seed: u64, rejected: usize) -> McEstimate {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
    McEstimate {
        mean,
        standard_error: (var / n as f64).sqrt(),
        n_paths: n,
        seed,
        rejected_paths: rejected,
    }
}

/// Runs `f` inside a pool of `workers` threads (all cores when `None`).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        b = b.num_threads(w);
    }
    let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Per-path results in path order; singular paths come back as `None`.
pub fn run_paths<T: Send>(
    sim: &Simulator,
    seed: u64,
    n: usize,
    f: impl Fn(&PathRecord) -> Result<T> + Sync,
) -> Result<Vec<Option<T>>> {
    let out: Vec<Result<Option<T>>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let rec = sim.simulate_path(seed, i)?;
            match f(&rec) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Singular { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let out: Vec<Option<T>> = out.into_iter().collect::<Result<_>>()?;
    let rejected = out.iter().filter(|v| v.is_none()).count();
    if rejected as f64 > MAX_REJECTED_FRACTION * n as f64 {
        return Err(Error::TooManyRejections { rejected, total: n });
    }
    Ok(out)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 paths, got {n}")));
    }
    Ok(())
}

/// `E[f(path)]` over `n` paths.
pub fn mc_expectation(
    sim: &Simulator,
    seed: u64,
    n: usize,
    f: impl Fn(&PathRecord) -> Result<f64> + Sync,
) -> Result<McEstimate> {
    check_n(n)?;
    let out = run_paths(sim, seed, n, f)?;
    let rejected = out.iter().filter(|v| v.is_none()).count();
    let vals: Vec<f64> = out.into_iter().flatten().collect();
    Ok(estimate(&vals, seed, rejected))
}

/// Paired estimates of `E[a]` and `E[b]` from per-path pairs.
pub fn paired(
    sim: &Simulator,
    seed: u64,
    n: usize,
    beta: Vec<usize>,
    f: impl Fn(&PathRecord) -> Result<(f64, f64)> + Sync,
) -> Result<IbpReport> {
    check_n(n)?;
    let out = run_paths(sim, seed, n, f)?;
    let rejected = out.iter().filter(|v| v.is_none()).count();
    let (a, b): (Vec<f64>, Vec<f64>) = out.into_iter().flatten().unzip();
    Ok(IbpReport::new(
        beta,
        estimate(&a, seed, rejected),
        estimate(&b, seed, rejected),
    ))
}

/// Lifted path and its regularized state `F_M`.
pub fn lift_regularized(sim: &Simulator, rec: &PathRecord, order: usize) -> Result<(PathJets, Vec<Jet>)> {
    let p = sim.lift(rec, order)?;
    let f = Simulator::regularize(&p, sim.variance());
    Ok((p, f))
}

/// Builds `(F, U)` on a lifted path from the path and `F_M`.
pub type DualityBuilder<'a> = dyn Fn(&PathJets, &[Jet]) -> Result<(Jet, Vec<Jet>)> + Sync + 'a;

/// `E⟨DF, U⟩` against `E[F δ(U)]`.
pub fn duality_check(sim: &Simulator, seed: u64, n: usize, order: usize, build: &DualityBuilder) -> Result<IbpReport> {
    paired(sim, seed, n, Vec::new(), |rec| {
        let (p, fm) = lift_regularized(sim, rec, order)?;
        let (f, u) = build(&p, &fm)?;
        let df = weighted_gradient(&f, &p.weights)?;
        let lhs = inner(&df, &u).value();
        let rhs = f.value() * divergence(&u, &p.weights, &p.log_density)?.value();
        Ok((lhs, rhs))
    })
}

/// Smooth bounded test functions with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    /// `Π_r cos(x_r)`.
    Cos,
    /// `x_r`.
    Coordinate(usize),
    /// Logistic step `1 / (1 + exp(-(x_0 - y) / w))`.
    Step { y: f64, width: f64 },
}

impl TestFunction {
    /// `∂_β φ(x)` (`β` empty gives `φ`).
    pub fn eval(&self, x: &[f64], beta: &[usize]) -> f64 {
        match *self {
            TestFunction::Cos => x
                .iter()
                .enumerate()
                .map(|(r, &v)| {
                    let k = beta.iter().filter(|&&b| b == r).count();
                    (v + k as f64 * std::f64::consts::FRAC_PI_2).cos()
                })
                .product(),
            TestFunction::Coordinate(r) => match beta {
                [] => x[r],
                [b] if *b == r => 1.0,
                _ => 0.0,
            },
            TestFunction::Step { y, width } => {
                assert!(beta.iter().all(|&b| b == 0), "step acts on the first component");
                let s = 1.0 / (1.0 + (-(x[0] - y) / width).exp());
                match beta.len() {
                    0 => s,
                    1 => s * (1.0 - s) / width,
                    2 => s * (1.0 - s) * (1.0 - 2.0 * s) / (width * width),
                    _ => panic!("step derivatives above order 2 are not provided"),
                }
            }
        }
    }
}

/// Builds the `G` of `E[∂_β φ(F) G] = E[φ(F) H_β(F, G)]`.
pub type GBuilder<'a> = dyn Fn(&PathJets, &[Jet]) -> Result<Jet> + Sync + 'a;

/// Two-sided check of `E[∂_β φ(F_M) G] = E[φ(F_M) H_β(F_M, G)]` on jets of
/// order `|β| + 1`.
pub fn ibp_check(
    sim: &Simulator,
    seed: u64,
    n: usize,
    phi: TestFunction,
    beta: &[usize],
    g: Option<&GBuilder>,
) -> Result<IbpReport> {
    let order = beta.len() + 1;
    paired(sim, seed, n, beta.to_vec(), |rec| {
        let (p, fm) = lift_regularized(sim, rec, order)?;
        let gj = match g {
            Some(b) => b(&p, &fm)?,
            None => Jet::constant(&p.space, 1.0),
        };
        let h = IbpContext::new(&fm, &p.weights)?.weight(&gj, beta, &p.weights, &p.log_density)?;
        let x: Vec<f64> = fm.iter().map(Jet::value).collect();
        Ok((phi.eval(&x, beta) * gj.value(), phi.eval(&x, &[]) * h.value()))
    })
}

/// `|p̂(ξ)|` at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierPoint {
    pub xi: f64,
    pub modulus: f64,
    pub standard_error: f64,
}

/// Modulus of the empirical characteristic function of `⟨ξ e_1, x⟩` with
/// delta-method standard errors.
pub fn characteristic_modulus(values: &[f64], xi_grid: &[f64]) -> Vec<FourierPoint> {
    let n = values.len() as f64;
    xi_grid
        .par_iter()
        .map(|&xi| {
            let c: Vec<f64> = values.iter().map(|v| (xi * v).cos()).collect();
            let s: Vec<f64> = values.iter().map(|v| (xi * v).sin()).collect();
            let cm = pairwise_sum(&c) / n;
            let sm = pairwise_sum(&s) / n;
            let m = cm.hypot(sm);
            let (mut vc, mut vs, mut cv) = (0.0, 0.0, 0.0);
            if m > 0.0 {
                let dc: Vec<f64> = c.iter().map(|v| (v - cm).powi(2)).collect();
                let ds: Vec<f64> = s.iter().map(|v| (v - sm).powi(2)).collect();
                let dx: Vec<f64> = c.iter().zip(&s).map(|(a, b)| (a - cm) * (b - sm)).collect();
                vc = pairwise_sum(&dc) / (n - 1.0);
                vs = pairwise_sum(&ds) / (n - 1.0);
                cv = pairwise_sum(&dx) / (n - 1.0);
            }
            let var = if m > 0.0 {
                (cm * cm * vc + sm * sm * vs + 2.0 * cm * sm * cv) / (m * m)
            } else {
                0.5 * (vc + vs)
            };
            FourierPoint {
                xi,
                modulus: m,
                standard_error: (var.max(0.0) / n).sqrt(),
            }
        })
        .collect()
}

/// First component of `F_M` on `n` paths (values only).
pub fn sample_values(sim: &Simulator, seed: u64, n: usize) -> Result<Vec<f64>> {
    let u = sim.variance().sqrt();
    let out = run_paths(sim, seed, n, |rec| Ok(rec.x_t[0] + u * rec.delta[0]))?;
    Ok(out.into_iter().flatten().collect())
}

/// `|p̂_{F_M}(ξ)|` on a grid of frequencies.
pub fn fourier_estimate(sim: &Simulator, seed: u64, n: usize, xi_grid: &[f64]) -> Result<Vec<FourierPoint>> {
    check_n(n)?;
    Ok(characteristic_modulus(&sample_values(sim, seed, n)?, xi_grid))
}

/// Least-squares slope of `ln |p̂|` against `ln ξ` over points whose
/// modulus exceeds `floor`; `None` with fewer than three such points.
pub fn log_log_slope(points: &[FourierPoint], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.xi > 0.0 && p.modulus > floor)
        .map(|p| (p.xi.ln(), p.modulus.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Pointwise density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPoint {
    pub y: f64,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Per-path `(F_M, H_{(1)}(F_M, 1))` for a one-dimensional model.
pub fn weight_samples(sim: &Simulator, seed: u64, n: usize) -> Result<(Vec<(f64, f64)>, usize)> {
    if sim.model().d != 1 {
        return Err(Error::Domain("density reconstruction needs d = 1".into()));
    }
    check_n(n)?;
    let out = run_paths(sim, seed, n, |rec| {
        let (p, fm) = lift_regularized(sim, rec, 2)?;
        let one = Jet::constant(&p.space, 1.0);
        let h = IbpContext::new(&fm, &p.weights)?.weight(&one, &[0], &p.weights, &p.log_density)?;
        Ok((fm[0].value(), h.value()))
    })?;
    let rejected = out.iter().filter(|v| v.is_none()).count();
    Ok((out.into_iter().flatten().collect(), rejected))
}

/// `p(y) ≈ E[S_w(F_M - y) H_{(1)}(F_M, 1)]` with a logistic step of width
/// `1e-3 · std(F_M)`.
pub fn density_from_weights(samples: &[(f64, f64)], y_grid: &[f64], seed: u64, rejected: usize) -> Vec<DensityPoint> {
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let sd = estimate(&xs, seed, 0).standard_error * (xs.len() as f64).sqrt();
    let width = 1e-3 * sd;
    y_grid
        .par_iter()
        .map(|&y| {
            let step = TestFunction::Step { y, width };
            let v: Vec<f64> = samples.iter().map(|&(x, h)| step.eval(&[x], &[]) * h).collect();
            let e = estimate(&v, seed, rejected);
            DensityPoint {
                y,
                estimate: e.mean,
                standard_error: e.standard_error,
            }
        })
        .collect()
}

pub fn density_via_ibp(sim: &Simulator, seed: u64, n: usize, y_grid: &[f64]) -> Result<Vec<DensityPoint>> {
    let (s, rejected) = weight_samples(sim, seed, n)?;
    Ok(density_from_weights(&s, y_grid, seed, rejected))
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
pub fn kde(values: &[f64], y_grid: &[f64]) -> Vec<DensityPoint> {
    let n = values.len() as f64;
    let e = estimate(values, 0, 0);
    let sd = e.standard_error * n.sqrt();
    let bw = 1.06 * sd * n.powf(-0.2);
    let norm = 1.0 / (bw * (2.0 * std::f64::consts::PI).sqrt());
    y_grid
        .iter()
        .map(|&y| {
            let k: Vec<f64> = values
                .iter()
                .map(|&x| norm * (-0.5 * ((x - y) / bw).powi(2)).exp())
                .collect();
            let e = estimate(&k, 0, 0);
            DensityPoint {
                y,
                estimate: e.mean,
                standard_error: e.standard_error,
            }
        })
        .collect()
}
