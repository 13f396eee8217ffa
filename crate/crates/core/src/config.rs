//! Scenario configuration: a TOML document whose every key has a default.
//!
//! An empty file yields the standard scenario: a 150 m square world, ten
//! stationary targets, a 25 m sensor disk moving at 0.5 m per step on a
//! lawn-mower sweep, `p_S = 1`, detection given in-FOV 0.98, push band
//! `[0.4, 0.6]`, extraction weight 0.5, prune weight 0.001, merge
//! threshold 10 and a confirmation length of 3.
//!
//! Key reference (section.key = default):
//!
//! ```toml
//! name = "default"
//! seed = 0
//! steps = 7278
//! num_targets = 10
//! stationary = true
//! clutter_rate = 0.0          # per-scan, see clutter_model
//! clutter_model = "bernoulli" # or "poisson"
//! estimate = "exact"          # under | exact | over
//!
//! [world]   min_x = 0.0, min_y = 0.0, max_x = 150.0, max_y = 150.0
//! [sensor]  radius = 25.0, p_detect_given_in_fov = 0.98, meas_noise_var = 1.0
//! [motion]  survival_prob = 1.0, process_noise = 0.05
//! [targets] speed = 0.05, direction_period = 400
//! [init]    mean_offset = 15.0, variance = 50.0, weight = 1.0,
//!           under_count = 5, over_decoys = 5
//! [filter]  pd_band_low = 0.4, pd_band_high = 0.6, prune_weight = 0.001,
//!           merge_threshold = 10.0 (squared Mahalanobis), max_components = 100,
//!           extract_weight = 0.5, birth_weight = 1.0, merge_rule = "moment",
//!           push_enabled = true
//! [tracks]  l_threshold = 3, gate = 10.0, max_coast = 10
//! [planner] strategy = "lawnmower", lane_spacing = 30.0, speed = 0.5, spread = "trace"
//! [gp]      mode = "auto", window = 50, refit_per_track = false,
//!           training_file = "<path to t,x,y csv>" (optional),
//!           training_steps = 1000, training_stride = 10
//! [gp.bounds] signal_variance = [0.01, 1e4], length_scale = [1.0, 1e3],
//!             noise_variance = [1e-6, 10.0], grid_points = 9
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::FovDisk;
use crate::gp::GpBounds;
use crate::phd::{FilterConfig, LinearMotionModel, SensorModel};
use crate::planner::{PlannerConfig, WorldBounds};
use crate::track::TrackConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterModel {
    /// One uniform clutter point per scan with probability `clutter_rate`.
    Bernoulli,
    /// Poisson number of clutter points with mean `clutter_rate`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEstimate {
    Under,
    Exact,
    Over,
}

impl std::str::FromStr for InitialEstimate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "under" => Ok(Self::Under),
            "exact" => Ok(Self::Exact),
            "over" => Ok(Self::Over),
            other => Err(Error::config(
                "estimate",
                format!("unknown estimate `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpMode {
    /// GP prediction for confirmed tracks when targets move.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub radius: f64,
    /// Sensor reliability `p(D|F)`.
    pub p_detect_given_in_fov: f64,
    /// Isotropic measurement noise variance (m^2).
    pub meas_noise_var: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            radius: 25.0,
            p_detect_given_in_fov: 0.98,
            meas_noise_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub survival_prob: f64,
    /// Per-step random-walk variance on each axis (m^2).
    pub process_noise: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            survival_prob: 1.0,
            process_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    /// Meters per step when targets move.
    pub speed: f64,
    /// Steps between random heading changes.
    pub direction_period: u64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            speed: 0.05,
            direction_period: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Mean distance between a seeded component and its target (m).
    pub mean_offset: f64,
    /// Diagonal of the initial covariances (m^2).
    pub variance: f64,
    pub weight: f64,
    pub under_count: usize,
    pub over_decoys: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            mean_offset: 15.0,
            variance: 50.0,
            weight: 1.0,
            under_count: 5,
            over_decoys: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub mode: GpMode,
    pub window: usize,
    pub refit_per_track: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_file: Option<PathBuf>,
    /// Length of the synthetic training trajectory when no file is given.
    pub training_steps: u64,
    /// Sampling stride of the synthetic training trajectory.
    pub training_stride: u64,
    pub bounds: GpBounds,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            mode: GpMode::Auto,
            window: crate::gp::DEFAULT_WINDOW,
            refit_per_track: false,
            training_file: None,
            training_steps: 1000,
            training_stride: 10,
            bounds: GpBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub steps: u64,
    pub num_targets: usize,
    pub stationary: bool,
    pub clutter_rate: f64,
    pub clutter_model: ClutterModel,
    pub estimate: InitialEstimate,
    pub world: WorldBounds,
    pub sensor: SensorConfig,
    pub motion: MotionConfig,
    pub targets: TargetConfig,
    pub init: InitConfig,
    pub filter: FilterConfig,
    pub tracks: TrackConfig,
    pub planner: PlannerConfig,
    pub gp: GpConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 0,
            steps: 7278,
            num_targets: 10,
            stationary: true,
            clutter_rate: 0.0,
            clutter_model: ClutterModel::Bernoulli,
            estimate: InitialEstimate::Exact,
            world: WorldBounds::default(),
            sensor: SensorConfig::default(),
            motion: MotionConfig::default(),
            targets: TargetConfig::default(),
            init: InitConfig::default(),
            filter: FilterConfig::default(),
            tracks: TrackConfig::default(),
            planner: PlannerConfig::default(),
            gp: GpConfig::default(),
        }
    }
}

fn check(ok: bool, key: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.steps > 0, "steps", "must be positive")?;
        check(
            self.clutter_rate >= 0.0 && self.clutter_rate.is_finite(),
            "clutter_rate",
            format!("must be nonnegative, got {}", self.clutter_rate),
        )?;
        if self.clutter_model == ClutterModel::Bernoulli {
            check(
                self.clutter_rate <= 1.0,
                "clutter_rate",
                format!(
                    "bernoulli clutter needs a rate in [0, 1], got {}",
                    self.clutter_rate
                ),
            )?;
        }
        self.world.validate()?;
        check(
            self.sensor.radius > 0.0,
            "sensor.radius",
            "must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.sensor.p_detect_given_in_fov),
            "sensor.p_detect_given_in_fov",
            format!(
                "must lie in [0, 1], got {}",
                self.sensor.p_detect_given_in_fov
            ),
        )?;
        check(
            self.sensor.meas_noise_var > 0.0,
            "sensor.meas_noise_var",
            "must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.motion.survival_prob),
            "motion.survival_prob",
            "must lie in [0, 1]",
        )?;
        check(
            self.motion.process_noise >= 0.0,
            "motion.process_noise",
            "must be nonnegative",
        )?;
        check(
            self.targets.speed >= 0.0,
            "targets.speed",
            "must be nonnegative",
        )?;
        check(
            self.targets.direction_period > 0,
            "targets.direction_period",
            "must be positive",
        )?;
        check(
            self.init.mean_offset >= 0.0,
            "init.mean_offset",
            "must be nonnegative",
        )?;
        check(
            self.init.variance > 0.0,
            "init.variance",
            "must be positive",
        )?;
        check(self.init.weight > 0.0, "init.weight", "must be positive")?;
        check(
            self.init.under_count <= self.num_targets,
            "init.under_count",
            "cannot exceed num_targets",
        )?;
        self.filter.validate()?;
        self.tracks.validate()?;
        self.planner.validate(self.sensor.radius)?;
        self.gp.bounds.validate()?;
        check(self.gp.window >= 2, "gp.window", "must be at least 2")?;
        check(
            self.gp.training_stride > 0,
            "gp.training_stride",
            "must be positive",
        )?;
        Ok(())
    }

    /// Planner settings with the world bounds filled in.
    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            bounds: self.world,
            ..self.planner.clone()
        }
    }

    pub fn sensor_model(&self, robot: Vector2<f64>) -> Result<SensorModel> {
        SensorModel::new(
            FovDisk::new(robot, self.sensor.radius)?,
            self.sensor.p_detect_given_in_fov,
            Matrix2::identity() * self.sensor.meas_noise_var,
            self.clutter_rate,
        )
    }

    pub fn motion_model(&self) -> Result<LinearMotionModel> {
        LinearMotionModel::random_walk(2, self.motion.process_noise, self.motion.survival_prob)
    }

    pub fn gp_enabled(&self) -> bool {
        match self.gp.mode {
            GpMode::On => true,
            GpMode::Off => false,
            GpMode::Auto => !self.stationary,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads and validates a scenario file. Missing keys take their defaults;
/// unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml(&text).map_err(|e| match e {
        Error::ConfigParse(msg) => Error::ConfigParse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn dump_config(cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml()?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.sensor.radius, 25.0);
        assert_eq!(cfg.planner.speed, 0.5);
        assert_eq!(cfg.motion.survival_prob, 1.0);
        assert_eq!(
            (cfg.filter.pd_band_low, cfg.filter.pd_band_high),
            (0.4, 0.6)
        );
        assert_eq!(cfg.filter.extract_weight, 0.5);
        assert_eq!(cfg.filter.prune_weight, 0.001);
        assert_eq!(cfg.filter.merge_threshold, 10.0);
        assert_eq!(cfg.tracks.l_threshold, 3);
        assert_eq!(cfg.sensor.p_detect_given_in_fov, 0.98);
    }

    #[test]
    fn negative_clutter_names_the_key() {
        let err = ScenarioConfig::from_toml("clutter_rate = -0.1").unwrap_err();
        assert!(
            matches!(&err, Error::Config { key, .. } if key == "clutter_rate"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml("[filter]\nprune = 0.1")
            .unwrap_err()
            .to_string();
        assert!(err.contains("prune"), "{err}");
        let err = ScenarioConfig::from_toml("colour = 3")
            .unwrap_err()
            .to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn nested_range_error_has_path() {
        let err = ScenarioConfig::from_toml("[sensor]\np_detect_given_in_fov = 1.5").unwrap_err();
        assert!(err.to_string().contains("sensor.p_detect_given_in_fov"));
        let err = ScenarioConfig::from_toml("[planner]\nlane_spacing = 60.0").unwrap_err();
        assert!(err.to_string().contains("planner.lane_spacing"));
    }

    #[test]
    fn round_trip() {
        let mut cfg = ScenarioConfig {
            clutter_rate: 0.1,
            estimate: InitialEstimate::Over,
            ..ScenarioConfig::default()
        };
        cfg.filter.birth_velocity_variance = Some(2.5);
        cfg.gp.training_file = Some(PathBuf::from("train.csv"));
        cfg.planner.strategy = crate::planner::Strategy::LargestGaussian;
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_file() {
        let err = load_config(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
