//! Closed-loop simulation: integrator, vehicle kinematics, the parking
//! scenario, episodes, logs and metrics.

pub mod config;
pub mod episode;
pub mod integrator;
pub mod log;
pub mod metrics;
pub mod scenario;
pub mod vehicle;

pub use config::{ControllerKind, SimConfig};
pub use episode::{run_episode, Episode, EpisodeResult};
pub use integrator::rk4_step;
pub use log::TrajectoryLog;
pub use metrics::{compute_metrics, Metrics};
pub use scenario::{parking_scenario, Scenario};
pub use vehicle::{vehicle_step, VehiclePose};
