//! The per-step search-and-tracking loop.

use std::collections::HashMap;

use log::{debug, warn};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{InitialEstimate, ScenarioConfig};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianComponent, Intensity};
use crate::gp::{
    fit_hyperparams, predict_displacement, read_training_trajectory, GpHyperparams, GpModel,
};
use crate::phd::{
    birth_from_measurements, extract_targets, predict, prune_merge, update, LinearMotionModel,
    MotionOverride, SensorModel,
};
use crate::planner::{Planner, RobotState};
use crate::sim::metrics::{compute_metrics, MetricsRecord};
use crate::sim::world::{sense, step_world, GroundTruthTarget, WorldMotion};
use crate::track::{Track, TrackManager, TrackStatus};

const LAYOUT_STREAM: u64 = 0;
const WORLD_STREAM: u64 = 1;
const SENSOR_STREAM: u64 = 2;
/// Fixed seed for the synthetic GP training trajectory, so every run of a
/// configuration learns the same hyperparameters.
const TRAINING_SEED: u64 = 0x5eed_6a55;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub step: u64,
    pub robot: Vector2<f64>,
    pub measurements: Vec<Vector2<f64>>,
    pub truth: Vec<Vector2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackLogRow {
    pub step: u64,
    pub track_id: u64,
    pub x: f64,
    pub y: f64,
    pub p_xx: f64,
    pub p_xy: f64,
    pub p_yy: f64,
    pub status: TrackStatus,
}

impl TrackLogRow {
    fn snapshot(step: u64, t: &Track) -> Self {
        let p = t.latest();
        Self {
            step,
            track_id: t.id(),
            x: p.mean[0],
            y: p.mean[1],
            p_xx: p.cov[(0, 0)],
            p_xy: p.cov[(0, 1)],
            p_yy: p.cov[(1, 1)],
            status: t.status(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub config: ScenarioConfig,
    pub metrics: Vec<MetricsRecord>,
    pub final_tracks: Vec<Track>,
    pub final_intensity: Intensity,
    pub events: Vec<StepEvent>,
    pub track_log: Vec<TrackLogRow>,
}

/// Everything produced by one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub metrics: MetricsRecord,
    pub event: StepEvent,
}

/// Target positions uniform over the world, headings uniform.
pub fn initial_targets<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Vec<GroundTruthTarget> {
    let b = &cfg.world;
    (0..cfg.num_targets)
        .map(|_| GroundTruthTarget {
            position: Vector2::new(
                b.min_x + rng.random::<f64>() * b.width(),
                b.min_y + rng.random::<f64>() * b.height(),
            ),
            speed: cfg.targets.speed,
            heading: rng.random::<f64>() * std::f64::consts::TAU,
            direction_period: cfg.targets.direction_period,
        })
        .collect()
}

/// Prior belief: components offset from (a subset of) the true targets by
/// a uniformly oriented displacement whose length is uniform on
/// `[0, 2 * mean_offset]`; the overestimate adds uniform decoys.
pub fn initial_belief<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    truth: &[GroundTruthTarget],
    rng: &mut R,
) -> Result<Intensity> {
    let b = &cfg.world;
    let mut anchors: Vec<Vector2<f64>> = truth.iter().map(|t| t.position).collect();
    if cfg.estimate == InitialEstimate::Under {
        // Partial Fisher-Yates for a uniform subset.
        let k = cfg.init.under_count.min(anchors.len());
        for i in 0..k {
            let j = rng.random_range(i..anchors.len());
            anchors.swap(i, j);
        }
        anchors.truncate(k);
    }
    let mut means: Vec<Vector2<f64>> = anchors
        .into_iter()
        .map(|p| {
            let len = rng.random::<f64>() * 2.0 * cfg.init.mean_offset;
            let ang = rng.random::<f64>() * std::f64::consts::TAU;
            b.clamp(p + len * Vector2::new(ang.cos(), ang.sin()))
        })
        .collect();
    if cfg.estimate == InitialEstimate::Over {
        for _ in 0..cfg.init.over_decoys {
            means.push(Vector2::new(
                b.min_x + rng.random::<f64>() * b.width(),
                b.min_y + rng.random::<f64>() * b.height(),
            ));
        }
    }
    let v = cfg.init.variance;
    means
        .into_iter()
        .map(|m| GaussianComponent::new_2d(cfg.init.weight, [m.x, m.y], [[v, 0.0], [0.0, v]]))
        .collect::<Result<Vec<_>>>()
        .map(Intensity::new)
}

/// Noisy `(t, x, y)` samples of one simulated moving target.
pub fn synthetic_training_trajectory(cfg: &ScenarioConfig) -> Vec<(f64, [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(TRAINING_SEED);
    let b = cfg.world;
    let mut target = vec![GroundTruthTarget {
        position: Vector2::new(0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y)),
        speed: cfg.targets.speed,
        heading: rng.random::<f64>() * std::f64::consts::TAU,
        direction_period: cfg.targets.direction_period,
    }];
    let motion = WorldMotion {
        bounds: b,
        stationary: false,
    };
    let sd = cfg.sensor.meas_noise_var.sqrt();
    let mut out = Vec::new();
    for t in 0..cfg.gp.training_steps {
        if t > 0 {
            step_world(&mut target, &motion, &mut rng, t);
        }
        if t % cfg.gp.training_stride == 0 {
            let p = target[0].position;
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            out.push((t as f64, [p.x + sd * nx, p.y + sd * ny]));
        }
    }
    out
}

/// Per-axis hyperparameters learned from the configured training
/// trajectory (file, or synthetic when none is given).
pub fn fit_motion_hyperparams(cfg: &ScenarioConfig) -> Result<Vec<GpHyperparams>> {
    let samples = match &cfg.gp.training_file {
        Some(path) => read_training_trajectory(path)?,
        None => synthetic_training_trajectory(cfg),
    };
    (0..2)
        .map(|k| {
            let axis: Vec<(f64, f64)> = samples.iter().map(|(t, p)| (*t, p[k])).collect();
            fit_hyperparams(&axis, &cfg.gp.bounds)
        })
        .collect()
}

/// A scenario advanced one step at a time.
pub struct Simulation {
    cfg: ScenarioConfig,
    step: u64,
    robot: RobotState,
    planner: Planner,
    truth: Vec<GroundTruthTarget>,
    motion: WorldMotion,
    intensity: Intensity,
    tracks: TrackManager,
    model: LinearMotionModel,
    sensor: SensorModel,
    gp_hyper: Option<Vec<GpHyperparams>>,
    world_rng: ChaCha8Rng,
    sensor_rng: ChaCha8Rng,
}

impl Simulation {
    /// Validates the configuration and, when GP prediction is enabled,
    /// fits its hyperparameters.
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let hyper = if cfg.gp_enabled() {
            Some(fit_motion_hyperparams(&cfg)?)
        } else {
            None
        };
        Self::with_gp_hyperparams(cfg, hyper)
    }

    /// Uses pre-fitted GP hyperparameters (`None` disables GP prediction).
    pub fn with_gp_hyperparams(
        cfg: ScenarioConfig,
        gp_hyper: Option<Vec<GpHyperparams>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(h) = &gp_hyper {
            if h.len() != 2 {
                return Err(Error::DimensionMismatch(format!(
                    "{} GP axes, expected 2",
                    h.len()
                )));
            }
        }
        let planner = Planner::new(cfg.planner_config());
        let robot = RobotState {
            position: planner.path().start(),
            speed: cfg.planner.speed,
        };
        let mut layout = stream(cfg.seed, LAYOUT_STREAM);
        let truth = initial_targets(&cfg, &mut layout);
        let intensity = initial_belief(&cfg, &truth, &mut layout)?;
        let sensor = cfg.sensor_model(robot.position)?;
        Ok(Self {
            step: 0,
            robot,
            planner,
            truth,
            motion: WorldMotion {
                bounds: cfg.world,
                stationary: cfg.stationary,
            },
            intensity,
            tracks: TrackManager::new(cfg.tracks.clone()),
            model: cfg.motion_model()?,
            sensor,
            gp_hyper,
            world_rng: stream(cfg.seed, WORLD_STREAM),
            sensor_rng: stream(cfg.seed, SENSOR_STREAM),
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn truth(&self) -> &[GroundTruthTarget] {
        &self.truth
    }

    pub fn intensity(&self) -> &Intensity {
        &self.intensity
    }

    pub fn tracks(&self) -> &[Track] {
        self.tracks.tracks()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.cfg.steps
    }

    /// GP motion for components that extended a confirmed track last step.
    /// The learned one-step displacement moves the component's mean and its
    /// latent variance widens the covariance; the filter adds `Q` on top,
    /// so uncertainty keeps growing while the target is unobserved.
    fn gp_overrides(&self) -> HashMap<usize, MotionOverride> {
        let mut out = HashMap::new();
        let Some(hyper) = &self.gp_hyper else {
            return out;
        };
        for track in self.tracks.confirmed() {
            if !track.updated_at(self.step) || track.life_length() < 2 {
                continue;
            }
            let source = track.latest().source;
            if out.contains_key(&source) || source >= self.intensity.len() {
                continue;
            }
            let history = track
                .history()
                .iter()
                .map(|p| (p.step as f64, &p.mean.as_slice()[..2]));
            let step = self.per_track_hyper(track, hyper).and_then(|h| {
                let model = GpModel::from_history(h, history, self.cfg.gp.window)?;
                predict_displacement(&model)
            });
            match step {
                Ok(d) => {
                    let c = &self.intensity.components()[source];
                    let mean = c.mean() + &d.mean;
                    let cov = c.cov() + d.covariance();
                    out.insert(source, (mean, cov));
                }
                Err(e) => debug!("track {}: GP prediction skipped: {e}", track.id()),
            }
        }
        out
    }

    fn per_track_hyper(
        &self,
        track: &Track,
        fitted: &[GpHyperparams],
    ) -> Result<Vec<GpHyperparams>> {
        if !self.cfg.gp.refit_per_track || track.life_length() < 5 {
            return Ok(fitted.to_vec());
        }
        let start = track.life_length().saturating_sub(self.cfg.gp.window);
        let window = &track.history()[start..];
        (0..2)
            .map(|k| {
                let axis: Vec<(f64, f64)> =
                    window.iter().map(|p| (p.step as f64, p.mean[k])).collect();
                fit_hyperparams(&axis, &self.cfg.gp.bounds)
            })
            .collect()
    }

    /// Plan, move the world, sense, filter, extract, associate, measure.
    pub fn step(&mut self) -> Result<StepReport> {
        let k = self.step + 1;

        self.robot.position = self
            .planner
            .next_position(&self.robot, &self.intensity, self.step);
        step_world(&mut self.truth, &self.motion, &mut self.world_rng, k);

        let sensor = self.sensor.centered_at(self.robot.position);
        let measurements = sense(
            &self.truth,
            &sensor,
            self.cfg.clutter_rate,
            self.cfg.clutter_model,
            &mut self.sensor_rng,
        );
        for z in &measurements {
            if !self.cfg.world.contains(z) {
                warn!(
                    "step {k}: measurement ({:.3}, {:.3}) outside the world",
                    z.x, z.y
                );
            }
        }

        let overrides = self.gp_overrides();
        let predicted = predict(&self.intensity, &self.model, &overrides)?;
        let updated = update(&predicted, &measurements, &sensor, &self.cfg.filter)?;
        let mut posterior = prune_merge(&updated, &self.cfg.filter)?;

        // Newborn components have not been through an update yet; they join
        // the belief for the next step but are not extracted or counted now.
        let targets = extract_targets(&posterior, &self.cfg.filter);
        self.tracks.associate(&targets, k);
        let truth: Vec<Vector2<f64>> = self.truth.iter().map(|t| t.position).collect();
        let metrics = compute_metrics(k, &truth, self.tracks.tracks(), &posterior);

        posterior.extend(birth_from_measurements(
            &measurements,
            &sensor,
            &self.cfg.filter,
        )?);
        self.intensity = posterior;
        self.step = k;
        Ok(StepReport {
            metrics,
            event: StepEvent {
                step: k,
                robot: self.robot.position,
                measurements,
                truth,
            },
        })
    }

    /// Runs the remaining steps, collecting logs.
    pub fn run(mut self) -> Result<ScenarioOutput> {
        let remaining = (self.cfg.steps - self.step) as usize;
        let mut metrics = Vec::with_capacity(remaining);
        let mut events = Vec::with_capacity(remaining);
        let mut track_log = Vec::new();
        while !self.is_finished() {
            let report = self.step()?;
            track_log.extend(
                self.tracks
                    .tracks()
                    .iter()
                    .map(|t| TrackLogRow::snapshot(self.step, t)),
            );
            metrics.push(report.metrics);
            events.push(report.event);
        }
        Ok(ScenarioOutput {
            config: self.cfg,
            metrics,
            final_tracks: self.tracks.into_tracks(),
            final_intensity: self.intensity,
            events,
            track_log,
        })
    }
}

/// Builds and runs a whole scenario. Deterministic for a fixed seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    Simulation::new(cfg.clone())?.run()
}
