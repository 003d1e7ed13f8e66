//! Reverse parallel parking as two references: a steering-rate profile for
//! the steering plant and a speed profile for the drive plant.
//!
//! The path is two tangent circular arcs of equal radius driven in reverse.
//! Steering only changes at standstill, so the heading change of each arc is
//! `arc · tan(δ) / L` no matter how well the speed is tracked; the pose error
//! comes from tracking error integrated into distance and steering angle.

use serde::{Deserialize, Serialize};

use crate::adaptation::{ReferenceSignal, Segment};
use crate::error::{ensure_finite, Error, Result};
use crate::simkit::vehicle::{wrap_angle, Pose2, DEFAULT_STEER_MAX};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub start: Pose2,
    pub bay: Pose2,
    pub wheelbase: f64,
    pub steer_max: f64,
    /// Magnitude of the steering-rate reference (rad/s).
    pub steer_rate: f64,
    /// Magnitude of the reversing speed reference (m/s).
    pub drive_speed: f64,
    /// Pause between phases (s).
    pub gap: f64,
    /// Time allowed after the last phase (s).
    pub settle: f64,
    /// Phase durations are rounded up to multiples of this (s).
    pub grid: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            start: Pose2::default(),
            bay: Pose2 {
                x: -1.6,
                y: -0.4,
                heading: 0.0,
            },
            wheelbase: 0.5,
            steer_max: DEFAULT_STEER_MAX,
            steer_rate: 0.5,
            drive_speed: 0.4,
            gap: 1.0,
            settle: 2.0,
            grid: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub steer: ReferenceSignal,
    pub drive: ReferenceSignal,
    pub bay: Pose2,
    /// Signed steering angle of the first arc.
    pub steer_angle: f64,
    /// Length of each arc (m).
    pub arc_length: f64,
    /// Time at which the last phase (including settling) ends.
    pub end_time: f64,
}

impl Scenario {
    pub fn is_trivial(&self) -> bool {
        self.arc_length == 0.0
    }
}

struct Timeline {
    grid: f64,
    ticks: u64,
    segments: Vec<Segment>,
}

impl Timeline {
    fn new(grid: f64) -> Self {
        Self {
            grid,
            ticks: 0,
            segments: vec![Segment { start: 0.0, value: 0.0 }],
        }
    }

    fn now(&self) -> f64 {
        self.ticks as f64 * self.grid
    }

    /// Holds a value whose integral over the phase is `area`, at nominal
    /// magnitude `rate`, then returns to zero.
    fn pulse(&mut self, area: f64, rate: f64) {
        if area == 0.0 {
            return;
        }
        let ticks = ((area.abs() / rate) / self.grid - 1e-9).ceil().max(1.0) as u64;
        let duration = ticks as f64 * self.grid;
        self.segments.push(Segment {
            start: self.now(),
            value: area / duration,
        });
        self.ticks += ticks;
        self.segments.push(Segment {
            start: self.now(),
            value: 0.0,
        });
    }

    fn wait(&mut self, seconds: f64) {
        self.ticks += (seconds / self.grid - 1e-9).ceil().max(0.0) as u64;
    }
}

/// Builds both references for the configured start pose and bay.
pub fn parking_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    ensure_finite(
        "scenario",
        &[
            cfg.start.x,
            cfg.start.y,
            cfg.start.heading,
            cfg.bay.x,
            cfg.bay.y,
            cfg.bay.heading,
        ],
    )?;
    for (name, v) in [
        ("wheelbase", cfg.wheelbase),
        ("steer_max", cfg.steer_max),
        ("steer_rate", cfg.steer_rate),
        ("drive_speed", cfg.drive_speed),
        ("grid", cfg.grid),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(format!("scenario.{name} must be positive, got {v}")));
        }
    }
    if !(cfg.gap >= 0.0) || !(cfg.settle >= 0.0) {
        return Err(Error::config("scenario.gap and scenario.settle must be non-negative"));
    }
    if wrap_angle(cfg.bay.heading - cfg.start.heading).abs() > 1e-9 {
        return Err(Error::config(
            "bay unreachable: bay heading must equal the start heading for a two-arc manoeuvre",
        ));
    }

    let (s, c) = cfg.start.heading.sin_cos();
    let (gx, gy) = (cfg.bay.x - cfg.start.x, cfg.bay.y - cfg.start.y);
    let ahead = c * gx + s * gy;
    let lateral = -s * gx + c * gy;
    let back = -ahead;

    let mut tl = Timeline::new(cfg.grid);
    let mut steer_tl = Timeline::new(cfg.grid);
    let (steer_angle, arc_length);

    if back.abs() < 1e-12 && lateral.abs() < 1e-12 {
        steer_angle = 0.0;
        arc_length = 0.0;
    } else if back <= 0.0 {
        return Err(Error::config(format!(
            "bay unreachable: it must lie behind the start pose (longitudinal offset {back:.3} m)"
        )));
    } else if lateral.abs() < 1e-12 {
        steer_angle = 0.0;
        arc_length = back / 2.0;
    } else {
        let phi = 2.0 * (lateral.abs() / back).atan();
        let radius = back / (2.0 * phi.sin());
        let delta = (cfg.wheelbase / radius).atan();
        if delta > cfg.steer_max {
            return Err(Error::config(format!(
                "bay unreachable: needs steering {delta:.3} rad, limit is {:.3} rad",
                cfg.steer_max
            )));
        }
        steer_angle = lateral.signum() * delta;
        arc_length = radius * phi;
    }

    // The drive timeline and the steering timeline advance together; each
    // phase pulses one of them while the other holds zero.
    let phase = |drive: &mut Timeline, steer: &mut Timeline, steer_area: f64, drive_area: f64| {
        if steer_area != 0.0 {
            steer.pulse(steer_area, cfg.steer_rate);
            drive.ticks = steer.ticks;
        }
        if drive_area != 0.0 {
            drive.pulse(drive_area, cfg.drive_speed);
            steer.ticks = drive.ticks;
        }
        drive.wait(cfg.gap);
        steer.ticks = drive.ticks;
    };

    if arc_length > 0.0 {
        phase(&mut tl, &mut steer_tl, steer_angle, 0.0);
        phase(&mut tl, &mut steer_tl, 0.0, -arc_length);
        phase(&mut tl, &mut steer_tl, -2.0 * steer_angle, 0.0);
        phase(&mut tl, &mut steer_tl, 0.0, -arc_length);
        phase(&mut tl, &mut steer_tl, steer_angle, 0.0);
    }
    tl.wait(cfg.settle);

    Ok(Scenario {
        steer: ReferenceSignal::Piecewise(steer_tl.segments),
        drive: ReferenceSignal::Piecewise(tl.segments.clone()),
        bay: cfg.bay,
        steer_angle,
        arc_length,
        end_time: tl.now(),
    })
}
