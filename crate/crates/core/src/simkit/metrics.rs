//! Tracking and parking metrics computed from the logged samples.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simkit::config::Criteria;
use crate::simkit::log::TrajectoryLog;
use crate::simkit::vehicle::{wrap_angle, Pose2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelMetrics {
    /// Time after which `|e_m|` stays inside the band (horizon if never).
    pub settling_time: f64,
    pub settled: bool,
    /// Largest `|e_m|` after the first sign change.
    pub overshoot: f64,
    /// Trapezoidal `∫ e_m² dt`.
    pub ise: f64,
}

pub fn compute_metrics(log: &TrajectoryLog, band: f64) -> Result<ChannelMetrics> {
    let recs = log.records();
    if recs.is_empty() {
        return Err(Error::EmptyLog);
    }
    let horizon = recs[recs.len() - 1].t;
    let (settling_time, settled) = match recs.iter().rposition(|r| r.em.abs() >= band) {
        None => (0.0, true),
        Some(i) if i + 1 == recs.len() => (horizon, false),
        Some(i) => (recs[i + 1].t, true),
    };
    let overshoot = recs
        .windows(2)
        .position(|w| w[0].em * w[1].em < 0.0)
        .map_or(0.0, |k| {
            recs[k + 1..].iter().map(|r| r.em.abs()).fold(0.0, f64::max)
        });
    let ise = recs
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].em * w[0].em + w[1].em * w[1].em))
        .sum();
    Ok(ChannelMetrics {
        settling_time,
        settled,
        overshoot,
        ise,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub settling_time: f64,
    pub settled: bool,
    pub overshoot: f64,
    pub ise: f64,
    pub position_error: f64,
    pub heading_error: f64,
    /// Position error (m) plus absolute heading error (rad).
    pub final_pose_error: f64,
    pub completed: bool,
    pub clamp_events: u64,
    pub projection_events: u64,
    pub steer: ChannelMetrics,
    pub drive: ChannelMetrics,
}

impl Metrics {
    pub fn from_channels(
        steer: ChannelMetrics,
        drive: ChannelMetrics,
        final_pose: Pose2,
        bay: Pose2,
        criteria: &Criteria,
    ) -> Self {
        let position_error = ((final_pose.x - bay.x).powi(2) + (final_pose.y - bay.y).powi(2)).sqrt();
        let heading_error = wrap_angle(final_pose.heading - bay.heading).abs();
        Self {
            settling_time: steer.settling_time.max(drive.settling_time),
            settled: steer.settled && drive.settled,
            overshoot: steer.overshoot.max(drive.overshoot),
            ise: steer.ise + drive.ise,
            position_error,
            heading_error,
            final_pose_error: position_error + heading_error,
            completed: position_error < criteria.position_tol && heading_error < criteria.heading_tol,
            clamp_events: 0,
            projection_events: 0,
            steer,
            drive,
        }
    }

    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("write to string");
        kv("completed", self.completed.to_string());
        kv("settled", self.settled.to_string());
        kv("settling_time", self.settling_time.to_string());
        kv("overshoot", self.overshoot.to_string());
        kv("ise", self.ise.to_string());
        kv("position_error", self.position_error.to_string());
        kv("heading_error", self.heading_error.to_string());
        kv("final_pose_error", self.final_pose_error.to_string());
        kv("clamp_events", self.clamp_events.to_string());
        kv("projection_events", self.projection_events.to_string());
        for (name, c) in [("steer", &self.steer), ("drive", &self.drive)] {
            kv(&format!("{name}.settling_time"), c.settling_time.to_string());
            kv(&format!("{name}.settled"), c.settled.to_string());
            kv(&format!("{name}.overshoot"), c.overshoot.to_string());
            kv(&format!("{name}.ise"), c.ise.to_string());
        }
        out
    }
}
