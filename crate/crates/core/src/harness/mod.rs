//! Scenario replay, calibration, gait sweeps and trajectory metrics.

pub mod bundled;
pub mod calibrate;
pub mod fixtures;
pub mod gait;
pub mod metrics;
pub mod scenario;
pub mod sweep;
pub mod telemetry;

pub use metrics::{compute_metrics, turn_metrics, MetricConfig, MetricReport};
pub use scenario::{run_scenario, run_to_report, RunOutput, Scenario};
pub use telemetry::TelemetryRecord;
