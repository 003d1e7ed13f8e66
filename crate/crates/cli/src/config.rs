//! Experiment configuration: one TOML document whose sections follow the
//! library's module boundaries.

use std::path::{Path, PathBuf};

use mmaflc::identifier::DEFAULT_HIDDEN;
use mmaflc::plant::{Basis, NOMINAL_THETA};
use mmaflc::simkit::config::{ControllerConfig, Criteria, InitialStates, ReferenceConfig};
use mmaflc::simkit::scenario::ScenarioConfig;
use mmaflc::simkit::{ControllerKind, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub basis: Basis,
    pub theta: Vec<f64>,
    /// Multiplier on the damping terms during episodes.
    pub friction_coeff: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            basis: Basis::Damping,
            theta: NOMINAL_THETA.to_vec(),
            friction_coeff: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifierSection {
    pub hidden: usize,
    /// Learning rate of the offline gradient descent.
    pub alpha: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the initial weight distribution.
    pub init_scale: f64,
    pub x1_range: [f64; 2],
    pub x2_range: [f64; 2],
    pub grid_points: usize,
    /// Friction of the plant the training data is sampled from.
    pub friction_coeff: f64,
    /// Weights file for episodes; `<out>/weights.txt` when absent.
    pub weights: Option<PathBuf>,
}

impl Default for IdentifierSection {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            alpha: 0.003,
            epochs: 20_000,
            seed: 7,
            init_scale: 0.5,
            x1_range: [-2.0, 2.0],
            x2_range: [-1.0, 1.0],
            grid_points: 11,
            friction_coeff: 1.0,
            weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub reference: ReferenceConfig,
    #[serde(flatten)]
    pub law: ControllerConfig,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::MmAflc,
            reference: ReferenceConfig::default(),
            law: ControllerConfig::default(),
        }
    }
}

impl TryFrom<toml::Table> for ControllerSection {
    type Error = String;

    fn try_from(mut table: toml::Table) -> Result<Self, String> {
        let mut section = Self::default();
        if let Some(kind) = table.remove("kind") {
            section.kind = kind.try_into().map_err(|e| format!("controller.kind: {e}"))?;
        }
        if let Some(reference) = table.remove("reference") {
            section.reference = reference
                .try_into()
                .map_err(|e| format!("controller.reference: {e}"))?;
        }
        section.law = toml::Value::Table(table)
            .try_into()
            .map_err(|e| format!("controller: {e}"))?;
        Ok(section)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub log_every: f64,
    pub duration: Option<f64>,
    /// Seed of the randomized controller bank.
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub initial: InitialStates,
    pub criteria: Criteria,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            dt: sim.dt,
            log_every: sim.log_every,
            duration: sim.duration,
            seed: sim.seed,
            scenario: sim.scenario,
            initial: sim.initial,
            criteria: sim.criteria,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsFormat {
    /// `metrics.txt`, one `key=value` per line.
    KeyValue,
    /// `metrics.json`.
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub metrics: Vec<MetricsFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            metrics: vec![MetricsFormat::KeyValue, MetricsFormat::Json],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub identifier: IdentifierSection,
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
}

/// Keys accepted by `sweep --param`.
pub const SWEEPABLE: [&str; 20] = [
    "plant.friction_coeff",
    "simulation.seed",
    "simulation.dt",
    "simulation.duration",
    "controller.reference.am",
    "controller.reference.bm",
    "controller.e_universe",
    "controller.edot_universe",
    "controller.rate_filter",
    "controller.baseline_kp",
    "controller.baseline_kd",
    "controller.robust_bound",
    "controller.theta_rate",
    "controller.alpha_rate",
    "controller.gamma_rate",
    "controller.n_models",
    "controller.spread",
    "controller.deadzone",
    "criteria.settle_band",
    "criteria.position_tol",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        let id = &self.identifier;
        if id.hidden == 0 {
            return Err(CliError::invalid("identifier.hidden", "must be at least 1"));
        }
        if !(id.alpha > 0.0) || !id.alpha.is_finite() {
            return Err(CliError::invalid("identifier.alpha", "must be positive"));
        }
        if id.epochs == 0 {
            return Err(CliError::invalid("identifier.epochs", "must be at least 1"));
        }
        if !(id.init_scale > 0.0) || !id.init_scale.is_finite() {
            return Err(CliError::invalid("identifier.init_scale", "must be positive"));
        }
        for (name, r) in [("identifier.x1_range", id.x1_range), ("identifier.x2_range", id.x2_range)] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(CliError::invalid(name, "must be an increasing pair of finite numbers"));
            }
        }
        if id.grid_points < 2 {
            return Err(CliError::invalid("identifier.grid_points", "must be at least 2"));
        }
        if !(id.friction_coeff > 0.0) || !id.friction_coeff.is_finite() {
            return Err(CliError::invalid("identifier.friction_coeff", "must be positive"));
        }
        if self.plant.basis.len() != self.plant.theta.len() {
            return Err(CliError::invalid(
                "plant.theta",
                &format!(
                    "has {} entries but the basis has {}",
                    self.plant.theta.len(),
                    self.plant.basis.len()
                ),
            ));
        }
        if self.output.metrics.is_empty() {
            return Err(CliError::invalid("output.metrics", "must list at least one format"));
        }
        self.sim_config(self.controller.kind)
            .validate()
            .map_err(CliError::core)?;
        mmaflc::simkit::parking_scenario(&self.simulation.scenario).map_err(CliError::core)?;
        Ok(())
    }

    /// Episode configuration for one controller kind.
    pub fn sim_config(&self, kind: ControllerKind) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            dt: s.dt,
            log_every: s.log_every,
            duration: s.duration,
            friction_coeff: self.plant.friction_coeff,
            seed: s.seed,
            controller_kind: kind,
            reference: self.controller.reference.clone(),
            controller: self.controller.law.clone(),
            plant: mmaflc::simkit::config::PlantSpec {
                basis: self.plant.basis.clone(),
                theta: self.plant.theta.clone(),
            },
            scenario: s.scenario.clone(),
            initial: s.initial,
            criteria: s.criteria,
            references: None,
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.identifier.seed = seed;
        self.simulation.seed = seed;
    }

    pub fn weights_path(&self, out: &Path) -> PathBuf {
        self.identifier
            .weights
            .clone()
            .unwrap_or_else(|| out.join("weights.txt"))
    }

    /// Sets one sweepable key, rejecting values that do not fit its type.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let as_count = |v: f64| -> Result<u64, CliError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(CliError::invalid(key, &format!("needs a non-negative integer, got {v}")))
            }
        };
        let c = &mut self.controller.law;
        match key {
            "plant.friction_coeff" => self.plant.friction_coeff = value,
            "simulation.seed" => self.simulation.seed = as_count(value)?,
            "simulation.dt" => self.simulation.dt = value,
            "simulation.duration" => self.simulation.duration = Some(value),
            "controller.reference.am" => self.controller.reference.am = value,
            "controller.reference.bm" => self.controller.reference.bm = Some(value),
            "controller.e_universe" => c.e_universe = value,
            "controller.edot_universe" => c.edot_universe = value,
            "controller.rate_filter" => c.rate_filter = value,
            "controller.baseline_kp" => c.baseline_kp = value,
            "controller.baseline_kd" => c.baseline_kd = value,
            "controller.robust_bound" => c.robust_bound = value,
            "controller.theta_rate" => c.theta_rate = value,
            "controller.alpha_rate" => c.alpha_rate = value,
            "controller.gamma_rate" => c.gamma_rate = value,
            "controller.n_models" => c.n_models = Some(as_count(value)? as usize),
            "controller.spread" => c.spread = value,
            "controller.deadzone" => c.deadzone = value,
            "criteria.settle_band" => self.simulation.criteria.settle_band = value,
            "criteria.position_tol" => self.simulation.criteria.position_tol = value,
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown sweep parameter {key:?}; sweepable keys: {}",
                    SWEEPABLE.join(", ")
                )))
            }
        }
        Ok(())
    }
}
