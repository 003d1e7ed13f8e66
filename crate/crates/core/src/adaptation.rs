//! Single-model adaptive machinery: reference model, certainty-equivalent
//! gain, adaptive laws, the robust term and Lyapunov bookkeeping.
//!
//! Everything acts on the actuated (second) channel; `b = (0, 1)` is not
//! invertible, so `b⁻¹` is read as "the scalar equation for `x2'`".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::Regressor;

pub const DEFAULT_DEADZONE: f64 = 1e-3;
pub const DEFAULT_BOUNDARY_LAYER: f64 = 0.01;

/// Piecewise-constant reference input: `value` holds from `start` until the
/// next segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSignal {
    Constant(f64),
    Piecewise(Vec<Segment>),
}

impl ReferenceSignal {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ReferenceSignal::Constant(r) => *r,
            ReferenceSignal::Piecewise(segs) => segs
                .iter()
                .take_while(|s| s.start <= t)
                .last()
                .map_or(0.0, |s| s.value),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            ReferenceSignal::Constant(r) => r.abs(),
            ReferenceSignal::Piecewise(segs) => {
                segs.iter().map(|s| s.value.abs()).fold(0.0, f64::max)
            }
        }
    }
}

/// `x_m' = A_m x_m + b_m r(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    am: f64,
    bm: f64,
    pub r: ReferenceSignal,
}

impl ReferenceModel {
    pub fn new(am: f64, bm: f64, r: ReferenceSignal) -> Result<Self> {
        if !(am < 0.0) || !am.is_finite() {
            return Err(Error::config(format!("reference pole am must be negative, got {am}")));
        }
        if !bm.is_finite() || !r.bound().is_finite() {
            return Err(Error::config("reference model gain and input must be finite"));
        }
        Ok(Self { am, bm, r })
    }

    pub fn am(&self) -> f64 {
        self.am
    }

    pub fn bm(&self) -> f64 {
        self.bm
    }
}

pub fn reference_step(reference: &ReferenceModel, xm: f64, t: f64) -> f64 {
    reference.am * xm + reference.bm * reference.r.at(t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gain {
    pub value: f64,
    /// True when `|x̂2|` fell inside the deadzone and `previous` was reused.
    pub frozen: bool,
}

/// `k̂ = A_m − N(x̂)θ̂ / x̂2`, frozen at `previous` when `|x̂2| ≤ deadzone`.
pub fn control_gain(am: f64, n_theta: f64, xhat: f64, deadzone: f64, previous: f64) -> Gain {
    if xhat.abs() <= deadzone {
        Gain {
            value: previous,
            frozen: true,
        }
    } else {
        Gain {
            value: am - n_theta / xhat,
            frozen: false,
        }
    }
}

/// `u = k̂·x + r`.
#[inline]
pub fn control_signal(khat: f64, x: f64, r: f64) -> f64 {
    khat * x + r
}

/// `θ̂' = −eᵀb·N(x̂)`; `e` is the two-channel identification error.
pub fn theta_law(e: [f64; 2], regressor: &[f64]) -> Vec<f64> {
    let eb = e[1];
    regressor.iter().map(|n| -eb * n).collect()
}

/// `α̂' = −e_m·b·ξ`.
pub fn alpha_law(em: f64, xi: &Regressor) -> Vec<f64> {
    xi.as_slice().iter().map(|x| -em * x).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EtaMode {
    /// `−E·sgn(e_m)` with `sgn(0) = 0`.
    Sign,
    /// `−E·sat(e_m / width)`.
    BoundaryLayer { width: f64 },
}

impl Default for EtaMode {
    fn default() -> Self {
        EtaMode::BoundaryLayer {
            width: DEFAULT_BOUNDARY_LAYER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustTerm {
    bound: f64,
    mode: EtaMode,
}

impl RobustTerm {
    pub fn new(bound: f64, mode: EtaMode) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::config(format!("robust bound E must be non-negative, got {bound}")));
        }
        if let EtaMode::BoundaryLayer { width } = mode {
            if !(width > 0.0) || !width.is_finite() {
                return Err(Error::config(format!("boundary layer width must be positive, got {width}")));
            }
        }
        Ok(Self { bound, mode })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn mode(&self) -> EtaMode {
        self.mode
    }
}

pub fn robust_eta(em: f64, term: &RobustTerm) -> f64 {
    let s = match term.mode {
        EtaMode::Sign => {
            if em > 0.0 {
                1.0
            } else if em < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        EtaMode::BoundaryLayer { width } => (em / width).clamp(-1.0, 1.0),
    };
    -term.bound * s
}

/// `V = ½(‖e‖² + ‖θ̃‖²)`.
pub fn lyapunov_v(e: &[f64], thetatilde: &[f64]) -> f64 {
    0.5 * (e.iter().map(|v| v * v).sum::<f64>() + thetatilde.iter().map(|v| v * v).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSample {
    pub t: f64,
    pub v: f64,
    pub vdot: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LyapunovTrace {
    samples: Vec<LyapunovSample>,
}

impl LyapunovTrace {
    pub fn push(&mut self, t: f64, v: f64, vdot: f64) -> Result<()> {
        if !(v >= 0.0) {
            return Err(Error::NonFinite {
                what: format!("Lyapunov value {v} at t={t}"),
            });
        }
        self.samples.push(LyapunovSample { t, v, vdot });
        Ok(())
    }

    pub fn samples(&self) -> &[LyapunovSample] {
        &self.samples
    }

    /// Index of the first sample that rose by more than `slack`, if any.
    pub fn first_increase(&self, slack: f64) -> Option<usize> {
        self.samples
            .windows(2)
            .position(|w| w[1].v > w[0].v + slack)
            .map(|k| k + 1)
    }
}
