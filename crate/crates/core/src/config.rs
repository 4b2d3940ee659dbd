//! Scenario files: one JSON document describing the obstacle, controller
//! parameters, integrator settings, initial conditions and output paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Mode;
use crate::geometry::{GeometryError, VecN};
use crate::params::{Gains, ObstacleSpec, ParamError, RawParams};
use crate::sim::SimConfig;
use crate::verify::sampling::SetLabel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    /// The document is well formed but the obstacle itself is infeasible.
    #[error(transparent)]
    Param(#[from] ParamError),
}

impl From<GeometryError> for ConfigError {
    fn from(e: GeometryError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub c: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub eps_s: f64,
    pub eps_h: f64,
    pub mu: f64,
    pub theta: f64,
    pub psi: f64,
    pub psi_bar: f64,
    /// `[k₋₁, k₀, k₁]`.
    pub gains: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_hint: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    #[serde(default = "stabilizing")]
    pub m0: Mode,
}

fn stabilizing() -> Mode {
    Mode::Stabilize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCloudConfig {
    pub sets: Vec<SetLabel>,
    pub samples_per_set: usize,
    #[serde(default = "default_cloud_dir")]
    pub dir: PathBuf,
}

fn default_cloud_dir() -> PathBuf {
    PathBuf::from("pointclouds")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub trajectory_dir: PathBuf,
    pub summary_path: PathBuf,
    pub report_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointcloud: Option<PointCloudConfig>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            trajectory_dir: PathBuf::from("trajectories"),
            summary_path: PathBuf::from("summary.json"),
            report_path: PathBuf::from("verify_report.json"),
            pointcloud: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub obstacle: ObstacleConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

fn vector(name: &str, e: &[f64], n: Option<usize>) -> Result<VecN, ConfigError> {
    let v = VecN::from_slice(e).map_err(|err| ConfigError::Invalid(format!("{name}: {err}")))?;
    match n {
        Some(n) if v.dim() != n => {
            Err(ConfigError::Invalid(format!("{name} has {} entries, obstacle center has {n}", v.dim())))
        }
        _ => Ok(v),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.obstacle.c.len()
    }

    pub fn raw_params(&self) -> Result<RawParams, ConfigError> {
        let c = vector("obstacle.c", &self.obstacle.c, None)?;
        let n = c.dim();
        let obstacle = ObstacleSpec::new(c, self.obstacle.epsilon)?;
        let p = &self.params;
        let w_hint = p.w_hint.as_deref().map(|w| vector("params.w_hint", w, Some(n))).transpose()?;
        Ok(RawParams {
            obstacle,
            eps_s: p.eps_s,
            eps_h: p.eps_h,
            mu: p.mu,
            theta: p.theta,
            psi: p.psi,
            psi_bar: p.psi_bar,
            gains: Gains::from_array(p.gains),
            w_hint,
        })
    }

    pub fn initial_conditions(&self) -> Result<Vec<(VecN, Mode)>, ConfigError> {
        let n = self.dim();
        self.runs
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((vector(&format!("runs[{i}].x0"), &r.x0, Some(n))?, r.m0)))
            .collect()
    }

    /// The reference three-dimensional scene with six initial conditions.
    pub fn reference_3d() -> Self {
        let runs = [
            [3.0, 3.0, 3.0],
            [2.5, 1.0, 3.0],
            [3.5, 2.0, 0.5],
            [-2.0, 2.0, 1.0],
            [0.0, 3.5, 2.0],
            [2.0, -1.5, 2.5],
        ]
        .into_iter()
        .map(|x0| RunConfig { x0: x0.to_vec(), m0: Mode::Stabilize })
        .collect();
        ScenarioConfig {
            obstacle: ObstacleConfig { c: vec![1.0, 1.0, 1.0], epsilon: 0.7 },
            params: ParamsConfig {
                eps_s: 0.8,
                eps_h: 0.901,
                mu: 0.444,
                theta: 0.276,
                psi: 0.249,
                psi_bar: 0.266,
                gains: [1.0, 1.0, 1.0],
                w_hint: Some(vec![-2.0, 1.0, 1.0]),
            },
            sim: SimConfig::default(),
            runs,
            outputs: OutputsConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    const MINIMAL: &str = r#"{
        "obstacle": {"c": [1, 1, 1], "epsilon": 0.7},
        "params": {"eps_s": 0.8, "eps_h": 0.901, "mu": 0.444, "theta": 0.276,
                   "psi": 0.249, "psi_bar": 0.266, "gains": [1, 1, 1], "w_hint": [-2, 1, 1]},
        "runs": [{"x0": [3, 3, 3], "m0": 0}, {"x0": [1, 2, 3]}]
    }"#;

    #[test]
    fn minimal_document_matches_reference_params() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.raw_params().unwrap(), RawParams::reference_3d());
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.outputs, OutputsConfig::default());
        let inits = cfg.initial_conditions().unwrap();
        assert_eq!(inits[1].1, Mode::Stabilize);
        assert!(validate(cfg.raw_params().unwrap()).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replacen("\"runs\"", "\"colour\": 1, \"runs\"", 1);
        assert!(matches!(ScenarioConfig::from_json(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replacen("\"epsilon\": 0.7", "\"epsilon\": 0.7, \"r\": 2", 1);
        assert!(ScenarioConfig::from_json(&text).is_err());
        let text = MINIMAL.replacen("\"runs\"", "\"sim\": {\"h\": 0.01, \"dt\": 1}, \"runs\"", 1);
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn partial_sim_block_keeps_defaults() {
        let text = MINIMAL.replacen("\"runs\"", "\"sim\": {\"h\": 0.01}, \"runs\"", 1);
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg.sim.h, 0.01);
        assert_eq!(cfg.sim.max_jumps_hard, 10);
    }

    #[test]
    fn dimension_mismatches() {
        let text = MINIMAL.replacen("[1, 2, 3]", "[1, 2]", 1);
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.initial_conditions(), Err(ConfigError::Invalid(_))));
        let text = MINIMAL.replacen("[-2, 1, 1]", "[-2, 1]", 1);
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.raw_params(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn bad_mode_and_infeasible_obstacle() {
        let text = MINIMAL.replacen("\"m0\": 0", "\"m0\": 2", 1);
        assert!(ScenarioConfig::from_json(&text).is_err());
        let text = MINIMAL.replacen("\"epsilon\": 0.7", "\"epsilon\": 2.0", 1);
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.raw_params(), Err(ConfigError::Param(ParamError::ObstacleInfeasible { .. }))));
    }

    #[test]
    fn reference_round_trips() {
        let cfg = ScenarioConfig::reference_3d();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }
}
