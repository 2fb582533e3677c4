//! JSON run configuration shared by every front end.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::presets::{preset, Preset};
use super::{ModelSpec, SimConfig};
use crate::error::{Error, Result};

/// Preset name with parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// `{d, t, M, coefficients, h_max, jet_order, seed}`; absent fields take the
/// preset defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub coefficients: CoefficientsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jet_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelSpec,
    pub sim: SimConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn for_preset(name: &str) -> Self {
        RunConfig {
            d: None,
            t: None,
            m: None,
            coefficients: CoefficientsConfig {
                preset: name.into(),
                params: BTreeMap::new(),
            },
            h_max: None,
            jet_order: None,
            seed: None,
        }
    }

    /// Parses a JSON document; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let Preset { model, t, m } = preset(&self.coefficients.preset, self.d, &self.coefficients.params)?;
        let mut sim = SimConfig::new(self.t.unwrap_or(t), self.m.unwrap_or(m), self.jet_order.unwrap_or(2));
        sim.h_max = self.h_max;
        if let Some(h) = self.h_max {
            if !(h > 0.0) {
                return Err(Error::Config(format!("h_max must be positive, got {h}")));
            }
        }
        Ok(Resolved {
            model,
            sim,
            seed: self.seed.unwrap_or(1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let c = RunConfig::from_json(
            r#"{"t": 0.5, "M": 3, "coefficients": {"preset": "example2", "params": {"a": 2.0}}, "seed": 9}"#,
        )
        .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.sim.t, 0.5);
        assert_eq!(r.sim.m, 3.0);
        assert_eq!(r.seed, 9);
        assert_eq!(r.model.d, 1);
    }

    #[test]
    fn errors_name_the_location() {
        let e = RunConfig::from_json("{\n \"t\": 1,\n \"bogus\": 2 }").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("line 3")), "{e}");
        let e = RunConfig::for_preset("nope").resolve().unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let mut c = RunConfig::for_preset("example2");
        c.coefficients.params.insert("zeta".into(), 1.0);
        assert!(matches!(c.resolve().unwrap_err(), Error::Config(_)));
    }
}
