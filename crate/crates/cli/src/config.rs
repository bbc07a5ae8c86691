use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use flipflop_core::cycle::CycleConfig;
use flipflop_core::ode::IntegratorConfig;
use flipflop_core::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Equilibria,
    Simulate,
    Cycle,
    Sweep,
    Classify,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<Scenario>,
    pub params: ModelParams,
    pub integrator: IntegratorConfig,
    pub equilibria: EquilibriaOptions,
    pub simulate: SimulateOptions,
    pub cycle: CycleOptions,
    pub sweep: SweepOptions,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaOptions {
    /// Southern critical temperature; defaults to `params.t_cs`.
    pub t_cs: Option<f64>,
    /// Northern critical temperature; defaults to `params.t_cn_plus`.
    pub t_cn: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulateMode {
    /// Smooth 3-D flow with a fixed northern critical temperature.
    Reduced,
    /// Switched 4-D flow.
    Flipflop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub mode: SimulateMode,
    pub t_end: f64,
    /// Northern critical temperature for the reduced flow; defaults to `params.t_cn_plus`.
    pub t_cn: Option<f64>,
    /// Uniform dense samples to write; accepted steps when absent.
    pub samples: Option<usize>,
    pub initial: InitialState,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            mode: SimulateMode::Reduced,
            t_end: 200.0,
            t_cn: None,
            samples: None,
            initial: InitialState::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    /// Defaults to `F(η_S, η_N)`.
    pub w: Option<f64>,
    pub eta_s: f64,
    pub eta_n: f64,
    /// Defaults to `η_N`.
    pub xi_n: Option<f64>,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            w: None,
            eta_s: -0.5,
            eta_n: 0.5,
            xi_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub samples: usize,
    pub delta: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        let c = CycleConfig::default();
        Self {
            tol: c.tol,
            max_iter: c.max_iter,
            samples: c.samples,
            delta: c.delta,
        }
    }
}

impl CycleOptions {
    pub fn to_config(&self, integrator: &IntegratorConfig) -> CycleConfig {
        CycleConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            samples: self.samples,
            delta: self.delta,
            integrator: integrator.clone(),
        }
    }
}

/// Grid axes; an absent axis holds the base parameter value, an empty one
/// empties the grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub eps: Option<Vec<f64>>,
    pub t_cn_minus: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Points to classify; `R_+` and `R_-` when empty.
    pub points: Vec<SigmaPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaPoint {
    pub w: f64,
    pub eta_s: f64,
    pub eta_n: f64,
    /// Defaults to `γ(η_N)`.
    pub xi_n: Option<f64>,
}

impl ScenarioConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<toml::Table>().with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(doc).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        self.cycle.to_config(&self.integrator).validate()?;
        let s = &self.simulate;
        if !(s.t_end.is_finite() && s.t_end > 0.0) {
            bail!("simulate.t_end must be positive");
        }
        if s.samples.is_some_and(|n| n < 2) {
            bail!("simulate.samples must be at least 2");
        }
        let axes = [("eps", &self.sweep.eps), ("t_cn_minus", &self.sweep.t_cn_minus), ("rho", &self.sweep.rho)];
        for (name, axis) in axes {
            if axis.iter().flatten().any(|v| !v.is_finite()) {
                bail!("sweep.{name} contains a non-finite value");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Applies `key.path=value`; the value is read as TOML, or as a bare string.
pub fn apply_override(doc: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{item}` is not of the form KEY=VALUE"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override `{item}` has an empty key");
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{item}`: `{part}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let cfg = ScenarioConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.params, ModelParams::default());
        assert_eq!(cfg.scenario, None);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let sets = [
            "params.eps=0.3",
            "scenario=cycle",
            "sweep.t_cn_minus=[-8, -5]",
            "simulate.initial.eta_n = 0.7",
        ]
        .map(String::from);
        let cfg = ScenarioConfig::load(None, &sets).unwrap();
        assert_eq!(cfg.params.eps, 0.3);
        assert_eq!(cfg.scenario, Some(Scenario::Cycle));
        assert_eq!(cfg.sweep.t_cn_minus, Some(vec![-8.0, -5.0]));
        assert_eq!(cfg.simulate.initial.eta_n, 0.7);
    }

    #[test]
    fn bad_overrides() {
        for bad in ["params.eps", "=3", "params..eps=1", "params.nope=1", "params.alpha1=0.9"] {
            assert!(ScenarioConfig::load(None, &[bad.to_string()]).is_err(), "{bad}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let sets = ["sweep.eps=[0.03, 0.3]", "classify.points=[{w = 1.0, eta_s = -0.9, eta_n = 0.8}]"].map(String::from);
        let cfg = ScenarioConfig::load(None, &sets).unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }
}
