//! Multi-target search and tracking with a Gaussian-mixture PHD filter and a
//! mobile sensor whose field of view is a disk.
//!
//! The crate is organised bottom-up: [`gaussian`] and [`fov`] hold the
//! mixture primitives and the in-view probability, [`phd`] the filter
//! recursion, [`gp`] the Gaussian-process motion predictor, [`track`] the
//! track bookkeeping, [`planner`] the robot policies and [`sim`] the closed
//! loop. [`runner`] writes run artefacts to disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fov;
pub mod gaussian;
pub mod gp;
pub mod phd;
pub mod planner;
pub mod runner;
pub mod sim;
pub mod track;

pub use config::{load_config, ScenarioConfig};
pub use error::{Error, Result};
pub use fov::{prob_detection, prob_in_fov};
pub use gaussian::{FovDisk, GaussianComponent, Intensity};
pub use phd::{FilterConfig, LinearMotionModel, SensorModel, TargetEstimate};
pub use planner::{Planner, PlannerConfig, Strategy, WorldBounds};
pub use sim::{run_scenario, Simulation};
pub use track::{Track, TrackConfig, TrackManager};
