//! One closed-loop parking episode: two controlled plants (steering angle
//! and drive speed), their estimators and controllers, and the vehicle pose,
//! all advanced together by one RK4 step over a flat state vector.
//!
//! Per channel the state block is
//!
//! ```text
//! [x1, x2, x_m, z, (x̂1, x̂2, θ̂…, controller…)]
//! ```
//!
//! where `z` filters the tracking error to produce its rate and the
//! parenthesized part exists only for the adaptive kinds. The pose
//! `(x, y, ψ)` closes the vector.

use serde::Serialize;

use crate::adaptation::{control_gain, lyapunov_v, robust_eta, theta_law, ReferenceSignal, RobustTerm};
use crate::error::{Error, Result};
use crate::fuzzy::{defuzzify, pd_table, FuzzyController, MembershipFamily, Regressor};
use crate::identifier::{dot, series_parallel_unchecked, Identifier};
use crate::multimodel::{
    bank_rhs, blend, gamma_full, init_hull, model_rhs, project_bank, BankInputs, BankLayout, BankParams,
    ModelBank,
};
use crate::plant::{PlantModel, PlantState};
use crate::simkit::config::{AlphaCenter, ControllerKind, SimConfig};
use crate::simkit::integrator::rk4_step;
use crate::simkit::log::{LogRecord, TrajectoryLog};
use crate::simkit::metrics::{compute_metrics, Metrics};
use crate::simkit::scenario::parking_scenario;
use crate::simkit::vehicle::{clamp_steer, pose_rate, Pose2, VehiclePose};

pub const CHANNELS: [&str; 2] = ["steer", "drive"];
pub const STEER: usize = 0;
pub const DRIVE: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
struct ChannelLayout {
    base: usize,
    xhat: usize,
    theta: usize,
    n_theta: usize,
    ctrl: usize,
    ctrl_len: usize,
    end: usize,
}

#[derive(Clone, Debug)]
enum Law {
    Baseline { alpha: Vec<f64> },
    Single { params: BankParams },
    Multi { layout: BankLayout, params: BankParams, project: bool },
}

/// Everything the controller computes at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlEval {
    pub r: f64,
    pub em: f64,
    pub edot: f64,
    pub xi: Regressor,
    pub u: f64,
    pub u_ce: f64,
    pub u_fz: f64,
    pub eta: f64,
    /// Per-model fuzzy outputs (empty for the baseline).
    pub outputs: Vec<f64>,
    pub gamma: Vec<f64>,
    pub khat: f64,
    pub khat_frozen: bool,
}

/// Counts of invariant checks and their violations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InvariantStats {
    pub simplex_checks: u64,
    pub simplex_violations: u64,
    pub envelope_checks: u64,
    pub envelope_violations: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub t: f64,
    /// Lyapunov value per channel after the step.
    pub v: [f64; 2],
    pub logged: bool,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub kind: ControllerKind,
    pub logs: [TrajectoryLog; 2],
    pub metrics: Metrics,
    /// Plant states `(x1, x2)` per channel at the horizon.
    pub final_plants: [[f64; 2]; 2],
    pub final_pose: VehiclePose,
    pub invariants: InvariantStats,
}

const SIMPLEX_TOL: f64 = 1e-9;
const ENVELOPE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Episode {
    cfg: SimConfig,
    plant: PlantModel,
    ident: Option<Identifier>,
    fuzzy: FuzzyController,
    law: Law,
    dim: usize,
    channels: [ChannelLayout; 2],
    refs: [ReferenceSignal; 2],
    am: f64,
    bm: f64,
    robust: RobustTerm,
    pose: usize,
    state: Vec<f64>,
    step: u64,
    stride: u64,
    total_steps: u64,
    khat: [f64; 2],
    logs: [TrajectoryLog; 2],
    clamp_events: u64,
    projection_events: u64,
    bay: Pose2,
    invariants: InvariantStats,
}

impl Episode {
    /// Validates everything and builds the initial state; nothing is
    /// integrated yet.
    pub fn new(cfg: &SimConfig, ident: Option<Identifier>) -> Result<Self> {
        cfg.validate()?;
        let kind = cfg.controller_kind;
        let ident = if kind.needs_identifier() {
            Some(ident.ok_or_else(|| {
                Error::Config(format!("controller kind {kind} needs trained identifier weights"))
            })?)
        } else {
            None
        };
        let ident = ident.map(|mut id| {
            id.mode = cfg.controller.identifier_mode;
            id
        });
        let plant = PlantModel::new(cfg.plant.basis.clone(), &cfg.plant.theta, cfg.friction_coeff)?;
        let scenario = parking_scenario(&cfg.scenario)?;
        let refs = match &cfg.references {
            Some(r) => [r.steer.clone(), r.drive.clone()],
            None => [scenario.steer.clone(), scenario.drive.clone()],
        };
        let duration = cfg.duration.unwrap_or(scenario.end_time);
        if duration < cfg.log_every {
            return Err(Error::Config(format!(
                "duration ({duration}) must be at least log_every ({})",
                cfg.log_every
            )));
        }
        let stride = cfg.log_stride()?;
        let total_steps = (duration / cfg.dt).round() as u64;

        let c = &cfg.controller;
        let family = MembershipFamily::symmetric(c.e_universe, c.edot_universe)?;
        let dim = family.n_rules();
        let baseline_alpha = pd_table(&family, c.baseline_kp, c.baseline_kd);
        let center = match c.center {
            AlphaCenter::Zero => vec![0.0; dim],
            AlphaCenter::PdTable => baseline_alpha.clone(),
        };
        let fuzzy = FuzzyController::new(family, vec![0.0; dim])?;
        let robust = RobustTerm::new(c.robust_bound, c.eta)?;
        let am = cfg.reference.am;
        let bm = cfg.reference.bm();
        let params = BankParams {
            am,
            alpha_rate: c.alpha_rate,
            gamma_rate: c.gamma_rate,
            robust,
        };

        let theta0 = match (&ident, &c.theta_init) {
            (None, _) => Vec::new(),
            (Some(id), Some(t)) => {
                if t.len() != id.theta_len() {
                    return Err(Error::Dimension {
                        context: "controller.theta_init",
                        expected: id.theta_len(),
                        got: t.len(),
                    });
                }
                t.clone()
            }
            (Some(id), None) => id.initial_theta(),
        };
        if let (Some(t), Some(r)) = (&ident, &c.theta_ref) {
            if r.len() != t.theta_len() {
                return Err(Error::Dimension {
                    context: "controller.theta_ref",
                    expected: t.theta_len(),
                    got: r.len(),
                });
            }
        }

        let mut banks: Vec<Option<ModelBank>> = vec![None, None];
        let law = match kind {
            ControllerKind::BaselineFuzzy => Law::Baseline {
                alpha: baseline_alpha,
            },
            ControllerKind::Aflc => Law::Single { params },
            ControllerKind::MmAflc => {
                let n = c.n_models.unwrap_or(dim + 1);
                for (ch, slot) in banks.iter_mut().enumerate() {
                    *slot = Some(if n == 1 {
                        ModelBank::degenerate(center.clone())?
                    } else {
                        init_hull(&center, c.spread, n, cfg.seed.wrapping_add(ch as u64), c.anchor)?
                    });
                }
                Law::Multi {
                    layout: banks[0].as_ref().expect("bank built").layout(),
                    params,
                    project: c.project_gamma,
                }
            }
        };

        let n_theta = theta0.len();
        let ctrl_len = match &law {
            Law::Baseline { .. } => 0,
            Law::Single { .. } => 1 + dim,
            Law::Multi { layout, .. } => layout.len(),
        };
        let mut channels = [ChannelLayout {
            base: 0,
            xhat: 0,
            theta: 0,
            n_theta: 0,
            ctrl: 0,
            ctrl_len: 0,
            end: 0,
        }; 2];
        let mut cursor = 0;
        for l in &mut channels {
            l.base = cursor;
            cursor += 4;
            if ident.is_some() {
                l.xhat = cursor;
                l.theta = cursor + 2;
                l.n_theta = n_theta;
                cursor += 2 + n_theta;
                l.ctrl = cursor;
                l.ctrl_len = ctrl_len;
                cursor += ctrl_len;
            }
            l.end = cursor;
        }
        let pose = cursor;
        let mut state = vec![0.0; pose + 3];
        let inits = [cfg.initial.steer, cfg.initial.drive];
        for (ch, l) in channels.iter().enumerate() {
            let [x1, x2] = inits[ch];
            state[l.base] = x1;
            state[l.base + 1] = x2;
            state[l.base + 2] = x2;
            state[l.base + 3] = 0.0;
            if ident.is_some() {
                state[l.xhat] = x1;
                state[l.xhat + 1] = x2;
                state[l.theta..l.theta + n_theta].copy_from_slice(&theta0);
                match &law {
                    Law::Single { .. } => {
                        state[l.ctrl] = x2;
                        state[l.ctrl + 1..l.ctrl + 1 + dim].copy_from_slice(&center);
                    }
                    Law::Multi { .. } => {
                        let bank = banks[ch].as_mut().expect("bank built");
                        bank.reset_predictions(x2);
                        state[l.ctrl..l.ctrl + ctrl_len].copy_from_slice(bank.state());
                    }
                    Law::Baseline { .. } => {}
                }
            }
        }
        state[pose] = cfg.scenario.start.x;
        state[pose + 1] = cfg.scenario.start.y;
        state[pose + 2] = cfg.scenario.start.heading;
        VehiclePose::new(cfg.scenario.start, inits[STEER][0], cfg.scenario.wheelbase)?;

        let n_gamma = match &law {
            Law::Baseline { .. } => 0,
            Law::Single { .. } => 1,
            Law::Multi { layout, .. } => layout.n_models,
        };
        let mut ep = Self {
            cfg: cfg.clone(),
            plant,
            ident,
            fuzzy,
            law,
            dim,
            channels,
            refs,
            am,
            bm,
            robust,
            pose,
            state,
            step: 0,
            stride,
            total_steps,
            khat: [am; 2],
            logs: [TrajectoryLog::new(cfg.log_every, n_gamma), TrajectoryLog::new(cfg.log_every, n_gamma)],
            clamp_events: 0,
            projection_events: 0,
            bay: scenario.bay,
            invariants: InvariantStats::default(),
        };
        ep.commit_gains();
        ep.record()?;
        Ok(ep)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn plant_state(&self, ch: usize) -> PlantState {
        let b = self.channels[ch].base;
        PlantState::new(self.state[b], self.state[b + 1])
    }

    pub fn estimated_state(&self, ch: usize) -> Option<PlantState> {
        self.ident.as_ref().map(|_| {
            let l = self.channels[ch];
            PlantState::new(self.state[l.xhat], self.state[l.xhat + 1])
        })
    }

    pub fn theta(&self, ch: usize) -> &[f64] {
        let l = self.channels[ch];
        &self.state[l.theta..l.theta + l.n_theta]
    }

    /// The channel's model bank (multi-model kind only).
    pub fn bank(&self, ch: usize) -> Option<ModelBank> {
        match &self.law {
            Law::Multi { layout, .. } => {
                let l = self.channels[ch];
                ModelBank::from_state(*layout, self.state[l.ctrl..l.ctrl + l.ctrl_len].to_vec()).ok()
            }
            _ => None,
        }
    }

    pub fn pose(&self) -> VehiclePose {
        let steer = clamp_steer(self.state[self.channels[STEER].base], self.cfg.scenario.steer_max).0;
        VehiclePose {
            x: self.state[self.pose],
            y: self.state[self.pose + 1],
            heading: self.state[self.pose + 2],
            steer,
            wheelbase: self.cfg.scenario.wheelbase,
        }
    }

    pub fn invariants(&self) -> InvariantStats {
        self.invariants
    }

    pub fn logs(&self) -> &[TrajectoryLog; 2] {
        &self.logs
    }

    /// Name of a flat-state entry, for integration diagnostics.
    pub fn component_name(&self, i: usize) -> String {
        if i >= self.pose {
            return ["pose.x", "pose.y", "pose.heading"]
                .get(i - self.pose)
                .map_or_else(|| format!("state[{i}]"), |s| s.to_string());
        }
        for (ch, l) in self.channels.iter().enumerate() {
            if i < l.end {
                let name = CHANNELS[ch];
                let k = i - l.base;
                return match k {
                    0 => format!("{name}.x1"),
                    1 => format!("{name}.x2"),
                    2 => format!("{name}.xm"),
                    3 => format!("{name}.error_filter"),
                    _ if i < l.theta => format!("{name}.xhat{}", i - l.xhat + 1),
                    _ if i < l.ctrl => format!("{name}.theta[{}]", i - l.theta),
                    _ => format!("{name}.controller[{}]", i - l.ctrl),
                };
            }
        }
        format!("state[{i}]")
    }

    fn reference_at_step(&self) -> [f64; 2] {
        let tm = (self.step as f64 + 0.5) * self.cfg.dt;
        [self.refs[0].at(tm), self.refs[1].at(tm)]
    }

    /// Controller evaluation for channel `ch` at state `y` and reference `r`.
    pub fn evaluate(&self, ch: usize, y: &[f64], r: f64) -> Result<ControlEval> {
        let l = self.channels[ch];
        let x2 = y[l.base + 1];
        let xm = y[l.base + 2];
        let z = y[l.base + 3];
        let em = x2 - xm;
        let edot = (em - z) / self.cfg.controller.rate_filter;
        let xi = self.fuzzy.regressor_at(em, edot)?;
        match (&self.law, &self.ident) {
            (Law::Baseline { alpha }, _) => {
                let u_ce = self.bm * r + self.am * x2;
                let u_fz = defuzzify(alpha, &xi)?;
                Ok(ControlEval {
                    r,
                    em,
                    edot,
                    xi,
                    u: u_ce + u_fz,
                    u_ce,
                    u_fz,
                    eta: 0.0,
                    outputs: Vec::new(),
                    gamma: Vec::new(),
                    khat: self.am,
                    khat_frozen: false,
                })
            }
            (law, Some(ident)) => {
                let xhat = PlantState::new(y[l.xhat], y[l.xhat + 1]);
                let theta = &y[l.theta..l.theta + l.n_theta];
                let n_hat = ident.estimate(xhat, theta);
                let gain = control_gain(self.am, n_hat, xhat.x2, self.cfg.controller.deadzone, self.khat[ch]);
                let u_ce = gain.value * x2 + self.bm * r;
                let eta = robust_eta(em, &self.robust);
                let (outputs, gamma, u_fz) = match law {
                    Law::Single { .. } => {
                        let u_fz = defuzzify(&y[l.ctrl + 1..l.ctrl + 1 + self.dim], &xi)?;
                        (vec![u_fz], vec![1.0], u_fz)
                    }
                    Law::Multi { layout, .. } => {
                        let bank = &y[l.ctrl..l.ctrl + l.ctrl_len];
                        let outputs = (0..layout.n_models)
                            .map(|i| {
                                let o = layout.model_offset(i) + 1;
                                defuzzify(&bank[o..o + layout.dim], &xi)
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        let gamma = gamma_full(&bank[layout.gamma_offset()..]);
                        let u_fz = blend(&gamma, &outputs);
                        (outputs, gamma, u_fz)
                    }
                    Law::Baseline { .. } => unreachable!("handled above"),
                };
                Ok(ControlEval {
                    r,
                    em,
                    edot,
                    xi,
                    u: u_ce + u_fz + eta,
                    u_ce,
                    u_fz,
                    eta,
                    outputs,
                    gamma,
                    khat: gain.value,
                    khat_frozen: gain.frozen,
                })
            }
            (_, None) => Err(Error::Config("adaptive controller without identifier".into())),
        }
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64], r: [f64; 2]) -> Result<()> {
        for (ch, l) in self.channels.iter().enumerate() {
            let ev = self.evaluate(ch, y, r[ch])?;
            let x = PlantState::new(y[l.base], y[l.base + 1]);
            let xm = y[l.base + 2];
            dy[l.base] = x.x2;
            dy[l.base + 1] = self.plant.nonlinearity(x) + ev.u;
            dy[l.base + 2] = self.am * xm + self.bm * ev.r;
            dy[l.base + 3] = ev.edot;
            let Some(ident) = &self.ident else { continue };
            let xhat = PlantState::new(y[l.xhat], y[l.xhat + 1]);
            let theta = &y[l.theta..l.theta + l.n_theta];
            let dxhat = series_parallel_unchecked(xhat, theta, x, ev.u, ident, self.am);
            dy[l.xhat] = dxhat[0];
            dy[l.xhat + 1] = dxhat[1];
            let psi = ident.regressor(x);
            let e = [xhat.x1 - x.x1, xhat.x2 - x.x2];
            let rate = self.cfg.controller.theta_rate;
            for (d, v) in dy[l.theta..l.theta + l.n_theta].iter_mut().zip(theta_law(e, &psi)) {
                *d = rate * v;
            }
            let inputs = BankInputs {
                x2: x.x2,
                n_theta: dot(&psi, theta),
                u: ev.u,
                xi: &ev.xi,
            };
            let ctrl = l.ctrl..l.ctrl + l.ctrl_len;
            match &self.law {
                Law::Single { params } => {
                    model_rhs(&y[ctrl.clone()], &inputs, params, &mut dy[ctrl]);
                }
                Law::Multi { layout, params, .. } => {
                    bank_rhs(layout, &y[ctrl.clone()], &inputs, params, &mut dy[ctrl])?;
                }
                Law::Baseline { .. } => {}
            }
        }
        let speed = y[self.channels[DRIVE].base + 1];
        let steer = clamp_steer(y[self.channels[STEER].base], self.cfg.scenario.steer_max).0;
        let rate = pose_rate(y[self.pose + 2], speed, steer, self.cfg.scenario.wheelbase);
        dy[self.pose..self.pose + 3].copy_from_slice(&rate);
        Ok(())
    }

    fn commit_gains(&mut self) {
        let Some(ident) = &self.ident else { return };
        for (ch, l) in self.channels.iter().enumerate() {
            let xhat = PlantState::new(self.state[l.xhat], self.state[l.xhat + 1]);
            let n_hat = ident.estimate(xhat, &self.state[l.theta..l.theta + l.n_theta]);
            self.khat[ch] =
                control_gain(self.am, n_hat, xhat.x2, self.cfg.controller.deadzone, self.khat[ch]).value;
        }
    }

    /// Lyapunov value of one channel's estimator.
    pub fn lyapunov(&self, ch: usize) -> f64 {
        let l = self.channels[ch];
        if self.ident.is_none() {
            return 0.0;
        }
        let y = &self.state;
        let e = [y[l.xhat] - y[l.base], y[l.xhat + 1] - y[l.base + 1]];
        let rate = self.cfg.controller.theta_rate;
        match &self.cfg.controller.theta_ref {
            Some(th) if rate > 0.0 => {
                let scale = rate.sqrt();
                let tilde: Vec<f64> = y[l.theta..l.theta + l.n_theta]
                    .iter()
                    .zip(th)
                    .map(|(a, b)| (a - b) / scale)
                    .collect();
                lyapunov_v(&e, &tilde)
            }
            _ => lyapunov_v(&e, &[]),
        }
    }

    /// Advances one integration step and commits the discrete updates
    /// (weight projection, frozen gain, clamp count, logging).
    pub fn step(&mut self) -> Result<StepInfo> {
        let t = self.time();
        let r = self.reference_at_step();
        let next = rk4_step(|_, y: &[f64], dy: &mut [f64]| self.rhs(y, dy, r), t, &self.state, self.cfg.dt)
            .map_err(|e| e.into_error(t, |i| self.component_name(i)))?;
        self.state = next;
        if let Law::Multi { layout, project, .. } = &self.law {
            for l in &self.channels {
                let bank = &mut self.state[l.ctrl..l.ctrl + l.ctrl_len];
                if *project && project_bank(bank, layout) {
                    self.projection_events += 1;
                }
                let g = gamma_full(&bank[layout.gamma_offset()..]);
                self.invariants.simplex_checks += 1;
                let on_simplex = g.iter().all(|v| *v >= -SIMPLEX_TOL)
                    && (g.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL;
                if !on_simplex {
                    self.invariants.simplex_violations += 1;
                }
            }
        }
        self.commit_gains();
        if self.state[self.channels[STEER].base].abs() > self.cfg.scenario.steer_max {
            self.clamp_events += 1;
        }
        self.step += 1;
        let logged = self.step % self.stride == 0;
        if logged {
            self.record()?;
        }
        Ok(StepInfo {
            t: self.time(),
            v: [self.lyapunov(STEER), self.lyapunov(DRIVE)],
            logged,
        })
    }

    fn record(&mut self) -> Result<()> {
        let r = self.reference_at_step();
        let pose = self.pose();
        for ch in 0..2 {
            let ev = self.evaluate(ch, &self.state, r[ch])?;
            if let Law::Multi { .. } = self.law {
                let lo = ev.outputs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = ev.outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                self.invariants.envelope_checks += 1;
                let scale = 1.0 + lo.abs().max(hi.abs());
                if ev.u_fz < lo - ENVELOPE_TOL * scale || ev.u_fz > hi + ENVELOPE_TOL * scale {
                    self.invariants.envelope_violations += 1;
                }
            }
            let x = self.plant_state(ch);
            let xhat = self.estimated_state(ch).unwrap_or(x);
            let v = self.lyapunov(ch);
            let l = self.channels[ch];
            self.logs[ch].push(LogRecord {
                t: 0.0,
                x1: x.x1,
                x2: x.x2,
                xm: self.state[l.base + 2],
                xhat1: xhat.x1,
                xhat2: xhat.x2,
                e: ((xhat.x1 - x.x1).powi(2) + (xhat.x2 - x.x2).powi(2)).sqrt(),
                em: ev.em,
                u: ev.u,
                gamma: ev.gamma,
                v,
                pose_x: pose.x,
                pose_y: pose.y,
                heading: pose.heading,
                steer: pose.steer,
            })?;
        }
        Ok(())
    }

    /// Integrates to the horizon and computes the metrics.
    pub fn run(mut self) -> Result<EpisodeResult> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<EpisodeResult> {
        let band = self.cfg.criteria.settle_band;
        let steer = compute_metrics(&self.logs[STEER], band)?;
        let drive = compute_metrics(&self.logs[DRIVE], band)?;
        let pose = self.pose();
        let mut metrics = Metrics::from_channels(steer, drive, pose.pose2(), self.bay, &self.cfg.criteria);
        metrics.clamp_events = self.clamp_events;
        metrics.projection_events = self.projection_events;
        let final_plants = [self.plant_state(STEER).as_array(), self.plant_state(DRIVE).as_array()];
        Ok(EpisodeResult {
            kind: self.cfg.controller_kind,
            logs: self.logs,
            metrics,
            final_plants,
            final_pose: pose,
            invariants: self.invariants,
        })
    }
}

/// Builds and runs one episode.
pub fn run_episode(cfg: &SimConfig, ident: Option<&Identifier>) -> Result<EpisodeResult> {
    Episode::new(cfg, ident.cloned())?.run()
}
