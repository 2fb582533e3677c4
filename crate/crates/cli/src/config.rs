//! Experiment configuration: a JSON file merged with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use jm_core::sde::config::{CoefficientsConfig, Resolved, RunConfig};
use jm_core::{Error, Result};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Model preset name.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (else JM_WORKERS, else all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "jet-order")]
    pub jet_order: Option<usize>,
    /// Truncation level.
    #[arg(long = "M")]
    pub m: Option<f64>,
    /// Time horizon.
    #[arg(long)]
    pub t: Option<f64>,
    /// State dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Preset parameter override `key=value` (repeatable).
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("parameter '{k}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// The JSON schema shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jet_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// One-based multi-index, e.g. `[1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    fn empty() -> Self {
        ExperimentConfig {
            command: None,
            d: None,
            t: None,
            m: None,
            coefficients: None,
            h_max: None,
            jet_order: None,
            seed: None,
            n: None,
            workers: None,
            beta: None,
            xi_min: None,
            xi_max: None,
            xi_steps: None,
            y_min: None,
            y_max: None,
            y_steps: None,
        }
    }

    /// Reads `--config` (if any) and applies the flags on top.
    pub fn load(command: &str, c: &Common) -> Result<Self> {
        let mut cfg = match &c.config {
            Some(path) => {
                let text = read(path)?;
                let cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                if let Some(cmd) = &cfg.command {
                    if cmd != command {
                        return Err(Error::Config(format!(
                            "{}: configuration is for '{cmd}', not '{command}'",
                            path.display()
                        )));
                    }
                }
                cfg
            }
            None => Self::empty(),
        };
        cfg.command = Some(command.into());
        if let Some(p) = &c.preset {
            match &mut cfg.coefficients {
                Some(co) => co.preset = p.clone(),
                None => {
                    cfg.coefficients = Some(CoefficientsConfig {
                        preset: p.clone(),
                        params: BTreeMap::new(),
                    })
                }
            }
        }
        if !c.params.is_empty() {
            let co = cfg
                .coefficients
                .as_mut()
                .ok_or_else(|| Error::Config("--param needs --preset or a configured model".into()))?;
            for (k, v) in &c.params {
                co.params.insert(k.clone(), *v);
            }
        }
        macro_rules! over {
            ($($f:ident),*) => {$( if c.$f.is_some() { cfg.$f = c.$f; } )*};
        }
        over!(d, t, m, jet_order, seed, n, workers);
        if cfg.workers.is_none() {
            if let Ok(v) = std::env::var("JM_WORKERS") {
                let w = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("JM_WORKERS must be a positive integer, got '{v}'")))?;
                cfg.workers = Some(w);
            }
        }
        Ok(cfg)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let coefficients = self
            .coefficients
            .clone()
            .ok_or_else(|| Error::Config("either --preset or --config with coefficients is required".into()))?;
        Ok(RunConfig {
            d: self.d,
            t: self.t,
            m: self.m,
            coefficients,
            h_max: self.h_max,
            jet_order: self.jet_order,
            seed: self.seed,
        })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.run_config()?.resolve()
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// `"1,1"` to zero-based `[0, 0]`.
pub fn parse_beta(s: &str, d: usize) -> Result<Vec<usize>> {
    let beta: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("--beta entries must be positive integers, got '{s}'")))
        })
        .collect::<Result<_>>()?;
    check_beta(&beta, d)
}

pub fn check_beta(beta: &[usize], d: usize) -> Result<Vec<usize>> {
    if beta.is_empty() || beta.iter().any(|&b| b == 0 || b > d) {
        return Err(Error::Config(format!("beta entries must lie in 1..={d}, got {beta:?}")));
    }
    Ok(beta.iter().map(|b| b - 1).collect())
}
