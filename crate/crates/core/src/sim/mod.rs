//! Simulated world, sensor and the closed search-and-track loop.

pub mod metrics;
pub mod scenario;
pub mod world;

pub use metrics::{compute_metrics, MetricsRecord, RunSummary, Stat};
pub use scenario::{run_scenario, ScenarioOutput, Simulation, StepEvent, TrackLogRow};
pub use world::{sense, step_world, GroundTruthTarget, WorldMotion};
