use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::flux::{burgers, FluxModel};
use crate::schemes::{FluxScheme, NumericalFlux};
use crate::targets::NRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FluxChoice {
    #[default]
    Burgers,
}

impl FluxChoice {
    pub fn model(self) -> FluxModel {
        match self {
            FluxChoice::Burgers => burgers(),
        }
    }
}

impl std::str::FromStr for FluxChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "burgers" => Ok(FluxChoice::Burgers),
            other => Err(format!("unknown flux {other:?}")),
        }
    }
}

/// Settings of the lower-bound experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerConfig {
    pub eps: f64,
    pub rule: NRule,
    pub dx_start: f64,
    pub dx_min: f64,
    pub fine_dx: f64,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig {
            eps: 0.005,
            rule: NRule::MaxSlope,
            dx_start: 1.0 / 50.0,
            dx_min: 1.0 / 3200.0,
            fine_dx: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub flux: FluxChoice,
    pub scheme: FluxScheme,
    pub l: f64,
    pub m: f64,
    pub big_m: f64,
    pub t_final: f64,
    pub cfl: f64,
    /// Working grid spacing of the ensemble runs.
    pub dx: f64,
    /// Spacings of the convergence-rate study.
    pub dx_ladder: Vec<f64>,
    /// Scales of the entropy estimates; chosen from the sample when empty.
    pub eps_ladder: Vec<f64>,
    pub alpha: f64,
    pub sample_count: usize,
    pub rate_sample_count: usize,
    pub seed: u64,
    pub target_rule: NRule,
    pub target_sample_cap: usize,
    pub resolution_tol: f64,
    pub lower: LowerConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            flux: FluxChoice::Burgers,
            scheme: FluxScheme::Godunov,
            l: 1.0,
            m: 1.0,
            big_m: 1.0,
            t_final: 1.0,
            cfl: 0.9,
            dx: 1.0 / 100.0,
            dx_ladder: vec![1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0],
            eps_ladder: Vec::new(),
            alpha: 1.0,
            sample_count: 200,
            rate_sample_count: 10,
            seed: 7,
            target_rule: NRule::default(),
            target_sample_cap: 1 << 16,
            resolution_tol: crate::bounds::DEFAULT_RESOLUTION_TOL,
            lower: LowerConfig::default(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn numerical_flux(&self) -> NumericalFlux {
        NumericalFlux::new(self.scheme, self.flux.model())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        for (name, v) in [
            ("l", self.l),
            ("m", self.m),
            ("big_m", self.big_m),
            ("t_final", self.t_final),
            ("dx", self.dx),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.sample_count == 0 {
            return bad("sample_count must be at least 1".into());
        }
        if self
            .dx_ladder
            .iter()
            .chain(&self.eps_ladder)
            .any(|&v| !(v > 0.0))
        {
            return bad("ladders must hold positive values".into());
        }
        Ok(())
    }
}
