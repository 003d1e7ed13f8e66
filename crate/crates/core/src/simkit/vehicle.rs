//! Kinematic bicycle model used to render the parking picture.
//!
//! The steering plant's position `x1` is the steering angle and the drive
//! plant's velocity `x2` is the longitudinal speed.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_STEER_MAX: f64 = 0.6;

/// Planar pose without the steering state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehiclePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub steer: f64,
    pub wheelbase: f64,
}

impl VehiclePose {
    pub fn new(pose: Pose2, steer: f64, wheelbase: f64) -> Result<Self> {
        if !(wheelbase > 0.0) || !wheelbase.is_finite() {
            return Err(Error::config(format!("wheelbase must be positive, got {wheelbase}")));
        }
        ensure_finite("vehicle pose", &[pose.x, pose.y, pose.heading, steer])?;
        Ok(Self {
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            steer,
            wheelbase,
        })
    }

    pub fn pose2(&self) -> Pose2 {
        Pose2 {
            x: self.x,
            y: self.y,
            heading: self.heading,
        }
    }
}

/// Clamps `steer` to `±steer_max`; the flag reports whether it had to.
pub fn clamp_steer(steer: f64, steer_max: f64) -> (f64, bool) {
    if steer > steer_max {
        (steer_max, true)
    } else if steer < -steer_max {
        (-steer_max, true)
    } else {
        (steer, false)
    }
}

/// `(ẋ, ẏ, ψ̇)` for the given speed and (already clamped) steering angle.
#[inline]
pub fn pose_rate(heading: f64, speed: f64, steer: f64, wheelbase: f64) -> [f64; 3] {
    [
        speed * heading.cos(),
        speed * heading.sin(),
        speed * steer.tan() / wheelbase,
    ]
}

/// Advances the pose by one RK4 step with speed and steering held.
pub fn vehicle_step(pose: VehiclePose, speed: f64, dt: f64, steer_max: f64) -> Result<(VehiclePose, bool)> {
    ensure_finite("vehicle speed", &[speed])?;
    let (steer, clamped) = clamp_steer(pose.steer, steer_max);
    let f = |h: f64| pose_rate(h, speed, steer, pose.wheelbase);
    let k1 = f(pose.heading);
    let k2 = f(pose.heading + 0.5 * dt * k1[2]);
    let k3 = f(pose.heading + 0.5 * dt * k2[2]);
    let k4 = f(pose.heading + dt * k3[2]);
    let inc = |i: usize| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    Ok((
        VehiclePose {
            x: pose.x + inc(0),
            y: pose.y + inc(1),
            heading: pose.heading + inc(2),
            steer,
            wheelbase: pose.wheelbase,
        },
        clamped,
    ))
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}
