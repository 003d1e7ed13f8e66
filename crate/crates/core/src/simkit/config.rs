//! Episode configuration with defaults for the canonical parking run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaptation::{EtaMode, ReferenceSignal, DEFAULT_DEADZONE};
use crate::error::{Error, Result};
use crate::identifier::IdentifierMode;
use crate::multimodel::GammaAnchor;
use crate::plant::{Basis, NOMINAL_THETA};
use crate::simkit::scenario::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    BaselineFuzzy,
    Aflc,
    MmAflc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::BaselineFuzzy, ControllerKind::Aflc, ControllerKind::MmAflc];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::BaselineFuzzy => "baseline-fuzzy",
            ControllerKind::Aflc => "aflc",
            ControllerKind::MmAflc => "mm-aflc",
        }
    }

    pub fn needs_identifier(&self) -> bool {
        !matches!(self, ControllerKind::BaselineFuzzy)
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown controller kind '{s}' (expected baseline-fuzzy, aflc or mm-aflc)")))
    }
}

/// Where the fuzzy consequents start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaCenter {
    #[default]
    Zero,
    /// The baseline PD table.
    PdTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    /// Reference-model pole `A_m` (< 0), shared by both channels.
    pub am: f64,
    /// Input gain `b_m`; `−A_m` (unit DC gain) when absent.
    pub bm: Option<f64>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { am: -4.0, bm: None }
    }
}

impl ReferenceConfig {
    pub fn bm(&self) -> f64 {
        self.bm.unwrap_or(-self.am)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Half-width of the tracking-error universe.
    pub e_universe: f64,
    /// Half-width of the error-rate universe.
    pub edot_universe: f64,
    /// Time constant of the filter producing the error rate (s).
    pub rate_filter: f64,
    pub baseline_kp: f64,
    pub baseline_kd: f64,
    /// Robust bound `E`.
    pub robust_bound: f64,
    pub eta: EtaMode,
    /// Gain on the network parameter law.
    pub theta_rate: f64,
    /// Gain ρ on the consequent law.
    pub alpha_rate: f64,
    /// Gain on the weight law.
    pub gamma_rate: f64,
    /// Bank size N; `None` means `m + 1`.
    pub n_models: Option<usize>,
    /// Largest offset of a bank vertex from the center.
    pub spread: f64,
    pub center: AlphaCenter,
    pub anchor: GammaAnchor,
    pub project_gamma: bool,
    pub deadzone: f64,
    pub identifier_mode: IdentifierMode,
    /// Initial network parameters; the identifier's default when absent.
    pub theta_init: Option<Vec<f64>>,
    /// True parameters for the logged Lyapunov value, when known.
    pub theta_ref: Option<Vec<f64>>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            e_universe: 0.2,
            edot_universe: 2.0,
            rate_filter: 0.02,
            baseline_kp: 12.0,
            baseline_kd: 0.2,
            robust_bound: 0.1,
            eta: EtaMode::default(),
            theta_rate: 500.0,
            alpha_rate: 100.0,
            gamma_rate: 500.0,
            n_models: None,
            spread: 1.0,
            center: AlphaCenter::Zero,
            anchor: GammaAnchor::PredictionError,
            project_gamma: true,
            deadzone: DEFAULT_DEADZONE,
            identifier_mode: IdentifierMode::Lumped,
            theta_init: None,
            theta_ref: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSpec {
    pub basis: Basis,
    /// Nominal parameters before friction scaling.
    pub theta: Vec<f64>,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            basis: Basis::Damping,
            theta: NOMINAL_THETA.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialStates {
    /// Steering plant `(angle, rate)`.
    pub steer: [f64; 2],
    /// Drive plant `(distance, speed)`.
    pub drive: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Criteria {
    /// `|e_m|` band for settling.
    pub settle_band: f64,
    pub position_tol: f64,
    pub heading_tol: f64,
}

impl Default for Criteria {
    fn default() -> Self {
        Self {
            settle_band: 0.01,
            position_tol: 0.1,
            heading_tol: 0.05,
        }
    }
}

/// Replacement references for both channels (tests and custom runs).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelReferences {
    pub steer: ReferenceSignal,
    pub drive: ReferenceSignal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub log_every: f64,
    /// Horizon; the scenario's end time when absent.
    pub duration: Option<f64>,
    pub friction_coeff: f64,
    pub seed: u64,
    pub controller_kind: ControllerKind,
    pub reference: ReferenceConfig,
    pub controller: ControllerConfig,
    pub plant: PlantSpec,
    pub scenario: ScenarioConfig,
    pub initial: InitialStates,
    pub criteria: Criteria,
    #[serde(skip)]
    pub references: Option<ChannelReferences>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            log_every: 0.1,
            duration: None,
            friction_coeff: 1.0,
            seed: 0,
            controller_kind: ControllerKind::MmAflc,
            reference: ReferenceConfig::default(),
            controller: ControllerConfig::default(),
            plant: PlantSpec::default(),
            scenario: ScenarioConfig::default(),
            initial: InitialStates::default(),
            criteria: Criteria::default(),
            references: None,
        }
    }
}

impl SimConfig {
    /// Integration steps per logged sample.
    pub fn log_stride(&self) -> Result<u64> {
        let ratio = self.log_every / self.dt;
        let k = ratio.round();
        if !(k >= 1.0) || (ratio - k).abs() > 1e-6 * k {
            return Err(Error::Config(format!(
                "log_every ({}) must be an integer multiple of dt ({})",
                self.log_every, self.dt
            )));
        }
        Ok(k as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.log_every > 0.0) || !self.log_every.is_finite() {
            return Err(Error::Config(format!("log_every must be positive, got {}", self.log_every)));
        }
        self.log_stride()?;
        if let Some(d) = self.duration {
            if !(d >= self.log_every) || !d.is_finite() {
                return Err(Error::Config(format!(
                    "duration ({d}) must be at least log_every ({})",
                    self.log_every
                )));
            }
        }
        if !(self.friction_coeff > 0.0) || !self.friction_coeff.is_finite() {
            return Err(Error::Config(format!(
                "friction_coeff must be positive, got {}",
                self.friction_coeff
            )));
        }
        if !(self.reference.am < 0.0) || !self.reference.am.is_finite() {
            return Err(Error::Config(format!("reference.am must be negative, got {}", self.reference.am)));
        }
        let c = &self.controller;
        for (name, v) in [
            ("e_universe", c.e_universe),
            ("edot_universe", c.edot_universe),
            ("rate_filter", c.rate_filter),
            ("spread", c.spread),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("controller.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("baseline_kp", c.baseline_kp),
            ("baseline_kd", c.baseline_kd),
            ("robust_bound", c.robust_bound),
            ("theta_rate", c.theta_rate),
            ("alpha_rate", c.alpha_rate),
            ("gamma_rate", c.gamma_rate),
            ("deadzone", c.deadzone),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("controller.{name} must be non-negative, got {v}")));
            }
        }
        if c.n_models == Some(0) {
            return Err(Error::Config("controller.n_models must be at least 1".into()));
        }
        let crit = &self.criteria;
        for (name, v) in [
            ("settle_band", crit.settle_band),
            ("position_tol", crit.position_tol),
            ("heading_tol", crit.heading_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("criteria.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
