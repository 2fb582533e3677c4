//! Subcommand implementations. Each returns the data file contents and
//! whether its assertions passed.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use jm_core::estimators::{
    density_from_weights, duality_check, fourier_estimate, ibp_check, kde, log_log_slope, run_paths, weight_samples,
    IbpReport, TestFunction,
};
use jm_core::jet::weighted_gradient;
use jm_core::poisson::{
    broadness_theta, inverse_moment_bound, inverse_moment_exact, LevyFunctional, RadialFn, RadialMeasure, ThetaEstimate,
    ThetaKind,
};
use jm_core::regularity::{report, serialize_extended};
use jm_core::sde::config::Resolved;
use jm_core::sde::Simulator;
use jm_core::{Error, Result};

use crate::config::{check_beta, parse_beta, ExperimentConfig};

/// Data written to the output file.
pub struct Artifact {
    pub body: Vec<u8>,
    pub pass: bool,
}

/// One CSV row: `name, params, estimate, se, n, seed`.
#[derive(Debug, Serialize)]
struct Row {
    name: &'static str,
    params: String,
    estimate: f64,
    se: f64,
    n: usize,
    seed: u64,
}

fn csv_rows(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn json_body<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn simulator(r: &Resolved, min_order: usize) -> Result<Simulator> {
    let mut sim = r.sim.clone();
    sim.jet_order = sim.jet_order.max(min_order);
    Simulator::new(r.model.clone(), sim)
}

fn ibp_rows(r: &IbpReport, kind: &'static str, params: &str, seed: u64) -> Vec<Row> {
    let names: (&'static str, &'static str) = match kind {
        "duality" => ("duality_direct", "duality_weighted"),
        _ => ("ibp_direct", "ibp_weighted"),
    };
    vec![
        Row {
            name: names.0,
            params: params.into(),
            estimate: r.direct.mean,
            se: r.direct.standard_error,
            n: r.direct.n_paths,
            seed,
        },
        Row {
            name: names.1,
            params: params.into(),
            estimate: r.weighted.mean,
            se: r.weighted.standard_error,
            n: r.weighted.n_paths,
            seed,
        },
        Row {
            name: "z_score",
            params: format!("{params};rejected={}", r.direct.rejected_paths),
            estimate: r.z_score,
            se: 0.0,
            n: r.direct.n_paths,
            seed,
        },
    ]
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let sim = simulator(&r, 0)?;
    let n = cfg.n_or(10);
    let d = r.model.d;
    let recs = run_paths(&sim, r.seed, n, |rec| Ok(rec.clone()))?;
    let u = sim.variance().sqrt();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "seed".into(), "jumps".into(), "real_jumps".into(), "discarded".into()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("f_{i}")));
    let err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(&header).map_err(err)?;
    for rec in recs.into_iter().flatten() {
        let mut row = vec![
            rec.index.to_string(),
            rec.seed.to_string(),
            rec.jump_count().to_string(),
            rec.real_jumps().to_string(),
            rec.discarded.to_string(),
        ];
        row.extend(rec.x_t.iter().map(|x| x.to_string()));
        row.extend(rec.x_t.iter().zip(&rec.delta).map(|(x, dl)| (x + u * dl).to_string()));
        w.write_record(&row).map_err(err)?;
    }
    Ok(Artifact {
        body: w.into_inner().map_err(|e| Error::Config(e.to_string()))?,
        pass: true,
    })
}

pub fn duality(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let sim = simulator(&r, 2)?;
    let n = cfg.n_or(100_000);
    // F = cos(F_M^1), U = D F_M^1 / (1 + (F_M^1)²)
    let rep = duality_check(&sim, r.seed, n, 2, &|p, fm| {
        let x = &fm[0];
        let du = weighted_gradient(x, &p.weights)?;
        let s = (x * x + 1.0).recip()?;
        Ok((x.cos(), du.iter().map(|u| u * &s).collect()))
    })?;
    Ok(Artifact {
        body: csv_rows(&ibp_rows(&rep, "duality", "F=cos(F1);U=DF1/(1+F1^2)", r.seed))?,
        pass: rep.passes(),
    })
}

pub fn ibp(cfg: &ExperimentConfig, beta_flag: Option<&str>) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let d = r.model.d;
    let beta = match (beta_flag, &cfg.beta) {
        (Some(s), _) => parse_beta(s, d)?,
        (None, Some(b)) => check_beta(b, d)?,
        (None, None) => vec![0],
    };
    let sim = simulator(&r, beta.len() + 1)?;
    let n = cfg.n_or(100_000);
    let rep = ibp_check(&sim, r.seed, n, TestFunction::Cos, &beta, None)?;
    let label: Vec<String> = beta.iter().map(|b| (b + 1).to_string()).collect();
    let params = format!("phi=cos;beta={}", label.join(" "));
    Ok(Artifact {
        body: csv_rows(&ibp_rows(&rep, "ibp", &params, r.seed))?,
        pass: rep.passes(),
    })
}

fn geometric(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || steps < 2 {
        return Err(Error::Config(format!("need 0 < xi-min < xi-max and xi-steps >= 2 (got {lo}, {hi}, {steps})")));
    }
    Ok((0..steps)
        .map(|i| lo * (hi / lo).powf(i as f64 / (steps - 1) as f64))
        .collect())
}

pub fn fourier(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let sim = simulator(&r, 0)?;
    let n = cfg.n_or(100_000);
    let grid = geometric(cfg.xi_min.unwrap_or(1.0), cfg.xi_max.unwrap_or(30.0), cfg.xi_steps.unwrap_or(30))?;
    let pts = fourier_estimate(&sim, r.seed, n, &grid)?;
    let floor = 3.0 / (n as f64).sqrt();
    let mut rows: Vec<Row> = pts
        .iter()
        .map(|p| Row {
            name: "abs_char_fn",
            params: format!("xi={}", p.xi),
            estimate: p.modulus,
            se: p.standard_error,
            n,
            seed: r.seed,
        })
        .collect();
    let slope = log_log_slope(&pts, floor);
    let kept = pts.iter().filter(|p| p.modulus > floor).count();
    rows.push(Row {
        name: "noise_floor",
        params: String::new(),
        estimate: floor,
        se: 0.0,
        n,
        seed: r.seed,
    });
    rows.push(Row {
        name: "log_log_slope",
        params: format!("points={kept}"),
        estimate: slope.unwrap_or(f64::NAN),
        se: 0.0,
        n,
        seed: r.seed,
    });
    Ok(Artifact {
        body: csv_rows(&rows)?,
        pass: slope.is_some_and(|s| s <= -1.0),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub fn density(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    if r.model.d != 1 {
        return Err(Error::Config("density-1d needs d = 1".into()));
    }
    let sim = simulator(&r, 2)?;
    let n = cfg.n_or(100_000);
    let (samples, rejected) = weight_samples(&sim, r.seed, n)?;
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    let lo = cfg.y_min.unwrap_or_else(|| quantile(&xs, 0.025));
    let hi = cfg.y_max.unwrap_or_else(|| quantile(&xs, 0.975));
    let steps = cfg.y_steps.unwrap_or(41);
    if !(hi > lo) || steps < 2 {
        return Err(Error::Config(format!("need y-min < y-max and y-steps >= 2 (got {lo}, {hi}, {steps})")));
    }
    let grid: Vec<f64> = (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<Row>, name, pts: Vec<jm_core::estimators::DensityPoint>| {
        for p in pts {
            rows.push(Row {
                name,
                params: format!("y={}", p.y),
                estimate: p.estimate,
                se: p.standard_error,
                n: samples.len(),
                seed: r.seed,
            });
        }
    };
    push(&mut rows, "density_ibp", density_from_weights(&samples, &grid, r.seed, rejected));
    push(&mut rows, "density_kde", kde(&values, &grid));
    let check: Vec<f64> = [0.2, 0.35, 0.5, 0.65, 0.8].iter().map(|&q| quantile(&xs, q)).collect();
    let a = density_from_weights(&samples, &check, r.seed, rejected);
    let b = kde(&values, &check);
    let mut pass = true;
    for (p, q) in a.iter().zip(&b) {
        let se = p.standard_error.hypot(q.standard_error);
        let gap = p.estimate - q.estimate;
        pass &= gap.abs() <= 3.0 * se;
        rows.push(Row {
            name: "ibp_minus_kde",
            params: format!("y={}", p.y),
            estimate: gap,
            se,
            n: samples.len(),
            seed: r.seed,
        });
    }
    Ok(Artifact {
        body: csv_rows(&rows)?,
        pass,
    })
}

pub fn laplace(cfg: &ExperimentConfig) -> Result<Artifact> {
    let t = cfg.t.unwrap_or(1.0);
    let n = cfg.n_or(100_000);
    let seed = cfg.seed.unwrap_or(1);
    if !(t > 0.0) || n < 2 {
        return Err(Error::Config(format!("need t > 0 and n >= 2 (got {t}, {n})")));
    }
    let lebesgue = |support: f64| RadialMeasure {
        d: 1,
        density: Arc::new(|_| 1.0),
        support,
        density_sup: 1.0,
    };
    // f = 1 on |z| <= 1 against Lebesgue measure on |z| < 2
    let compact = LevyFunctional {
        f: RadialFn(Arc::new(|_| 1.0)),
        nu: lebesgue(2.0),
        b: 1.0,
        t,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| compact.sample(&mut rng)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut pass = true;
    for s in [0.1, 0.5, 1.0, 2.0] {
        let v: Vec<f64> = xs.iter().map(|x| (-s * x).exp()).collect();
        let e = jm_core::estimators::estimate(&v, seed, 0);
        let closed = compact.laplace(s)?;
        pass &= (e.mean - closed).abs() <= 3.0 * e.standard_error;
        rows.push(Row { name: "laplace_mc", params: format!("s={s}"), estimate: e.mean, se: e.standard_error, n, seed });
        rows.push(Row { name: "laplace_closed", params: format!("s={s}"), estimate: closed, se: 0.0, n, seed });
    }
    let decay = LevyFunctional {
        f: RadialFn(Arc::new(|r: f64| (-r).exp())),
        nu: lebesgue(f64::INFINITY),
        b: 1.0,
        t,
    };
    for (label, lf) in [("compact", &compact), ("exp_decay", &decay)] {
        let u = lf.u_t()?;
        for p in [1.0, 2.0] {
            let exact = inverse_moment_exact(lf, u, p)?;
            let bound = match inverse_moment_bound(lf, p) {
                Ok(b) => b,
                Err(Error::Divergent(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            pass &= bound >= exact;
            let params = format!("example={label};p={p}");
            rows.push(Row { name: "inverse_moment_exact", params: params.clone(), estimate: exact, se: 0.0, n: 0, seed });
            rows.push(Row { name: "inverse_moment_bound", params, estimate: bound, se: 0.0, n: 0, seed });
        }
    }
    Ok(Artifact {
        body: csv_rows(&rows)?,
        pass,
    })
}

#[derive(Serialize)]
struct RegularityOut<'a> {
    #[serde(flatten)]
    report: jm_core::regularity::RegularityReport,
    config: &'a ExperimentConfig,
}

pub fn regularity(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let rep = report(&r.model, r.sim.t)?;
    Ok(Artifact {
        body: json_body(&RegularityOut { report: rep, config: cfg })?,
        pass: true,
    })
}

#[derive(Serialize)]
struct ThetaOut<'a> {
    schema: u32,
    model: String,
    #[serde(serialize_with = "serialize_extended")]
    declared_theta: f64,
    estimate: ThetaEstimate,
    regime_agrees: bool,
    config: &'a ExperimentConfig,
}

pub fn theta(cfg: &ExperimentConfig) -> Result<Artifact> {
    let r = cfg.resolve()?;
    let model = &r.model;
    let decl = model
        .regularity
        .ok_or_else(|| Error::Config(format!("model '{}' declares no broadness exponent", model.name)))?;
    let (cl, gl, h) = (model.c_low.clone(), model.gamma_low.clone(), model.h.clone());
    // nonincreasing envelope of c̲²: running maximum over [r, r + 40]
    let f = move |x: f64| (0..=800).map(|j| cl(x + 0.05 * j as f64).powi(2)).fold(0.0, f64::max);
    let nu = RadialMeasure {
        d: model.d,
        density: Arc::new(move |x| gl(x) * h(x)),
        support: f64::INFINITY,
        density_sup: model.h_sup,
    };
    let grid: Vec<f64> = (1..=80).map(|i| 10f64.powf(i as f64 / 2.0)).collect();
    let est = broadness_theta(&f, &nu, &grid)?;
    let declared = if decl.theta.is_infinite() {
        ThetaKind::Infinite
    } else if decl.theta == 0.0 {
        ThetaKind::Zero
    } else {
        ThetaKind::Finite
    };
    let agrees = est.kind == declared;
    Ok(Artifact {
        body: json_body(&ThetaOut {
            schema: 1,
            model: model.name.clone(),
            declared_theta: decl.theta,
            estimate: est,
            regime_agrees: agrees,
            config: cfg,
        })?,
        pass: agrees,
    })
}
