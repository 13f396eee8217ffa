//! Ground truth and the simulated sensor.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::config::ClutterModel;
use crate::phd::SensorModel;
use crate::planner::WorldBounds;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTarget {
    pub position: Vector2<f64>,
    /// Meters per step.
    pub speed: f64,
    /// Radians.
    pub heading: f64,
    /// Steps between heading changes.
    pub direction_period: u64,
}

/// Motion settings shared by every target in a world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldMotion {
    pub bounds: WorldBounds,
    pub stationary: bool,
}

const MAX_HEADING_DRAWS: usize = 64;

/// Advances every target one step. Headings are redrawn every
/// `direction_period` steps and whenever the next move would leave the
/// world; after repeated failures the target heads for the world center.
pub fn step_world<R: Rng + ?Sized>(
    targets: &mut [GroundTruthTarget],
    motion: &WorldMotion,
    rng: &mut R,
    step: u64,
) {
    if motion.stationary {
        return;
    }
    let b = &motion.bounds;
    let center = Vector2::new(0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y));
    for t in targets.iter_mut() {
        if step > 0 && step.is_multiple_of(t.direction_period) {
            t.heading = rng.random::<f64>() * TAU;
        }
        let advance = |h: f64| t.position + t.speed * Vector2::new(h.cos(), h.sin());
        let mut next = advance(t.heading);
        let mut draws = 0;
        while !b.contains(&next) && draws < MAX_HEADING_DRAWS {
            t.heading = rng.random::<f64>() * TAU;
            next = advance(t.heading);
            draws += 1;
        }
        if !b.contains(&next) {
            let to_center = center - t.position;
            t.heading = to_center.y.atan2(to_center.x);
            next = b.clamp(advance(t.heading));
        }
        t.position = next;
    }
}

/// Uniform point in a disk.
pub fn uniform_in_disk<R: Rng + ?Sized>(
    rng: &mut R,
    center: Vector2<f64>,
    radius: f64,
) -> Vector2<f64> {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * TAU;
    center + rho * Vector2::new(theta.cos(), theta.sin())
}

fn gaussian_noise<R: Rng + ?Sized>(rng: &mut R, cov: &Matrix2<f64>) -> Vector2<f64> {
    let l = cov
        .cholesky()
        .expect("measurement noise is positive definite")
        .l();
    let e = Vector2::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    l * e
}

/// Number of clutter points for one scan.
pub fn clutter_count<R: Rng + ?Sized>(rng: &mut R, rate: f64, model: ClutterModel) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    match model {
        ClutterModel::Bernoulli => usize::from(rng.random::<f64>() < rate),
        ClutterModel::Poisson => Poisson::new(rate)
            .map(|p| p.sample(rng) as usize)
            .unwrap_or(0),
    }
}

/// One scan: each target within the disk is detected with
/// `p_detect_given_in` and reported with Gaussian noise; clutter is
/// uniform over the disk. Detections come first, in target order, then
/// clutter; no identities are attached.
pub fn sense<R: Rng + ?Sized>(
    targets: &[GroundTruthTarget],
    sensor: &SensorModel,
    clutter_rate: f64,
    clutter_model: ClutterModel,
    rng: &mut R,
) -> Vec<Vector2<f64>> {
    let mut out = Vec::new();
    for t in targets {
        if !sensor.fov.contains(&t.position) {
            continue;
        }
        if rng.random::<f64>() < sensor.p_detect_given_in {
            out.push(t.position + gaussian_noise(rng, &sensor.meas_noise));
        }
    }
    for _ in 0..clutter_count(rng, clutter_rate, clutter_model) {
        out.push(uniform_in_disk(
            rng,
            sensor.fov.center(),
            sensor.fov.radius(),
        ));
    }
    out
}
