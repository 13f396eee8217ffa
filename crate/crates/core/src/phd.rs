//! Gaussian-mixture PHD recursion for a mobile sensor whose detection
//! probability is the mass of each component inside the sensor's disk.
//!
//! The filter state is a plain [`Intensity`] threaded through free
//! functions: [`predict`], [`update`], [`prune_merge`], then
//! [`birth_from_measurements`] and [`extract_targets`].

use std::collections::HashMap;

use log::warn;
use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fov::prob_detection;
use crate::gaussian::{merge_moment, merge_plain_average, FovDisk, GaussianComponent, Intensity};

#[derive(Debug, Clone)]
pub struct LinearMotionModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    survival_prob: f64,
}

impl LinearMotionModel {
    /// `process_noise` must be symmetric positive semi-definite; a zero
    /// matrix is allowed for deterministic dynamics.
    pub fn new(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        survival_prob: f64,
    ) -> Result<Self> {
        let d = transition.nrows();
        if transition.ncols() != d || process_noise.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "transition is {}x{}, process noise is {}x{}",
                transition.nrows(),
                transition.ncols(),
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        if !(0.0..=1.0).contains(&survival_prob) {
            return Err(Error::InvalidArgument(format!(
                "survival probability must lie in [0, 1], got {survival_prob}"
            )));
        }
        if (&process_noise - process_noise.transpose()).amax()
            > 1e-12 * process_noise.amax().max(1.0)
        {
            return Err(Error::InvalidArgument(
                "process noise is not symmetric".into(),
            ));
        }
        let min_eig = process_noise.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * process_noise.amax().max(1.0) {
            return Err(Error::InvalidArgument(
                "process noise is not positive semi-definite".into(),
            ));
        }
        Ok(Self {
            transition,
            process_noise,
            survival_prob,
        })
    }

    /// `F = I`, `Q = q I`.
    pub fn random_walk(dim: usize, q: f64, survival_prob: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim) * q,
            survival_prob,
        )
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn survival_prob(&self) -> f64 {
        self.survival_prob
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }
}

/// Limited-FOV position sensor with clutter uniform over the disk.
#[derive(Debug, Clone)]
pub struct SensorModel {
    pub fov: FovDisk,
    pub p_detect_given_in: f64,
    pub meas_noise: nalgebra::Matrix2<f64>,
    /// Expected clutter points per scan.
    pub clutter_mean: f64,
}

impl SensorModel {
    pub fn new(
        fov: FovDisk,
        p_detect_given_in: f64,
        meas_noise: nalgebra::Matrix2<f64>,
        clutter_mean: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_detect_given_in) {
            return Err(Error::InvalidArgument(format!(
                "p_detect_given_in must lie in [0, 1], got {p_detect_given_in}"
            )));
        }
        if !(clutter_mean >= 0.0 && clutter_mean.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "clutter mean must be nonnegative, got {clutter_mean}"
            )));
        }
        if meas_noise.cholesky().is_none()
            || (meas_noise[(0, 1)] - meas_noise[(1, 0)]).abs() > 1e-12
        {
            return Err(Error::InvalidArgument(
                "measurement noise must be symmetric positive definite".into(),
            ));
        }
        Ok(Self {
            fov,
            p_detect_given_in,
            meas_noise,
            clutter_mean,
        })
    }

    pub fn centered_at(&self, robot: Vector2<f64>) -> Self {
        Self {
            fov: self.fov.moved_to(robot),
            ..self.clone()
        }
    }

    /// Clutter intensity `kappa(z)` inside the disk.
    pub fn clutter_density(&self) -> f64 {
        self.clutter_mean / self.fov.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    Moment,
    PlainAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub pd_band_low: f64,
    pub pd_band_high: f64,
    pub prune_weight: f64,
    /// Squared Mahalanobis distance.
    pub merge_threshold: f64,
    pub max_components: usize,
    pub extract_weight: f64,
    pub birth_weight: f64,
    /// Prior velocity variance for births when the state carries velocity.
    pub birth_velocity_variance: Option<f64>,
    pub merge_rule: MergeRule,
    /// Apply the no-detection repulsion of in-band components.
    pub push_enabled: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            pd_band_low: 0.4,
            pd_band_high: 0.6,
            prune_weight: 0.001,
            merge_threshold: 10.0,
            max_components: 100,
            extract_weight: 0.5,
            birth_weight: 1.0,
            birth_velocity_variance: None,
            merge_rule: MergeRule::Moment,
            push_enabled: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
            }
        };
        prob("filter.pd_band_low", self.pd_band_low)?;
        prob("filter.pd_band_high", self.pd_band_high)?;
        if self.pd_band_low > self.pd_band_high {
            return Err(Error::config(
                "filter.pd_band_low",
                format!("must not exceed pd_band_high ({})", self.pd_band_high),
            ));
        }
        if !(self.prune_weight >= 0.0) {
            return Err(Error::config("filter.prune_weight", "must be nonnegative"));
        }
        if !(self.prune_weight < self.extract_weight) {
            return Err(Error::config(
                "filter.prune_weight",
                format!("must be below extract_weight ({})", self.extract_weight),
            ));
        }
        if !(self.merge_threshold > 0.0) {
            return Err(Error::config("filter.merge_threshold", "must be positive"));
        }
        if self.max_components == 0 {
            return Err(Error::config("filter.max_components", "must be positive"));
        }
        if !(self.birth_weight > 0.0) {
            return Err(Error::config("filter.birth_weight", "must be positive"));
        }
        if let Some(v) = self.birth_velocity_variance {
            if !(v > 0.0) {
                return Err(Error::config(
                    "filter.birth_velocity_variance",
                    "must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// An extracted target: a copy of a heavy component.
#[derive(Debug, Clone)]
pub struct TargetEstimate {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Index of the component it was extracted from.
    pub source: usize,
}

impl TargetEstimate {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }
}

/// Predicted mean and covariance for one component, e.g. from GP
/// regression over its confirmed track. The filter adds process noise.
pub type MotionOverride = (DVector<f64>, DMatrix<f64>);

pub fn predict(
    prior: &Intensity,
    model: &LinearMotionModel,
    overrides: &HashMap<usize, MotionOverride>,
) -> Result<Intensity> {
    if let Some(bad) = overrides.keys().find(|&&i| i >= prior.len()) {
        return Err(Error::InvalidArgument(format!(
            "motion override for component {bad}, but only {} exist",
            prior.len()
        )));
    }
    let f = model.transition();
    let q = model.process_noise();
    prior
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.dim() != model.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "component {i} has dimension {}, motion model {}",
                    c.dim(),
                    model.dim()
                )));
            }
            let w = model.survival_prob() * c.weight();
            match overrides.get(&i) {
                Some((m, p)) => GaussianComponent::new(w, m.clone(), p + q),
                None => GaussianComponent::new(w, f * c.mean(), f * c.cov() * f.transpose() + q),
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Intensity::new)
}

/// `mu' = p_D (mu - y) + mu`: moves a mean radially away from the sensor.
pub fn repulsion_push(mean: Vector2<f64>, robot: Vector2<f64>, p_d: f64) -> Vector2<f64> {
    p_d * (mean - robot) + mean
}

/// Position marginal of a component whose state leads with (x, y).
fn position_marginal(c: &GaussianComponent) -> Result<GaussianComponent> {
    if c.dim() == 2 {
        return Ok(c.clone());
    }
    if c.dim() < 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            got: c.dim(),
        });
    }
    GaussianComponent::new(
        c.weight(),
        c.mean().rows(0, 2).into_owned(),
        c.cov().view((0, 0), (2, 2)).into_owned(),
    )
}

/// Per-component detection probabilities against the sensor's current disk.
pub fn detection_probabilities(intensity: &Intensity, sensor: &SensorModel) -> Result<Vec<f64>> {
    intensity
        .iter()
        .map(|c| {
            prob_detection(
                &position_marginal(c)?,
                &sensor.fov,
                sensor.p_detect_given_in,
            )
        })
        .collect()
}

struct KalmanParts {
    predicted_meas: DVector<f64>,
    innovation: GaussianComponent,
    gain: DMatrix<f64>,
    posterior_cov: DMatrix<f64>,
}

fn kalman_parts(c: &GaussianComponent, r: &DMatrix<f64>) -> Result<KalmanParts> {
    let d = c.dim();
    let mut h = DMatrix::zeros(2, d);
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    let p = c.cov();
    let s = &h * p * h.transpose() + r;
    let predicted_meas = &h * c.mean();
    let innovation = GaussianComponent::new(1.0, predicted_meas.clone(), s.clone())?;
    let s_inv = s
        .clone()
        .cholesky()
        .ok_or_else(|| {
            Error::InvalidComponent("innovation covariance is not positive definite".into())
        })?
        .inverse();
    let gain = p * h.transpose() * s_inv;
    // Joseph form keeps the posterior symmetric positive definite.
    let i_kh = DMatrix::identity(d, d) - &gain * &h;
    let posterior_cov = &i_kh * p * i_kh.transpose() + &gain * r * gain.transpose();
    Ok(KalmanParts {
        predicted_meas,
        innovation,
        gain,
        posterior_cov,
    })
}

/// Measurement update. Returns the `n` no-detection copies followed by
/// `n` detection copies per measurement, in measurement order.
pub fn update(
    predicted: &Intensity,
    measurements: &[Vector2<f64>],
    sensor: &SensorModel,
    cfg: &FilterConfig,
) -> Result<Intensity> {
    let robot = sensor.fov.center();
    let p_d = detection_probabilities(predicted, sensor)?;
    let mut out = Vec::with_capacity(predicted.len() * (measurements.len() + 1));

    for (c, &pd) in predicted.iter().zip(&p_d) {
        let missed = c.with_weight((1.0 - pd) * c.weight())?;
        let in_band = pd >= cfg.pd_band_low && pd <= cfg.pd_band_high;
        if cfg.push_enabled && in_band {
            let pushed = repulsion_push(c.position(), robot, pd);
            let mut mean = c.mean().clone();
            mean[0] = pushed.x;
            mean[1] = pushed.y;
            out.push(missed.with_mean(mean)?);
        } else {
            out.push(missed);
        }
    }

    if measurements.is_empty() {
        return Ok(Intensity::new(out));
    }

    let r = DMatrix::from_iterator(2, 2, sensor.meas_noise.iter().copied());
    let parts = predicted
        .iter()
        .map(|c| kalman_parts(c, &r))
        .collect::<Result<Vec<_>>>()?;
    let kappa = sensor.clutter_density();

    for z in measurements {
        if !sensor.fov.contains(z) {
            warn!(
                "measurement ({:.3}, {:.3}) lies outside the sensor disk",
                z.x, z.y
            );
        }
        let zv = DVector::from_column_slice(z.as_slice());
        let numerators: Vec<f64> = predicted
            .iter()
            .zip(&p_d)
            .zip(&parts)
            .map(|((c, &pd), kp)| {
                if pd == 0.0 || c.weight() == 0.0 {
                    0.0
                } else {
                    pd * c.weight() * kp.innovation.density_unchecked(&zv)
                }
            })
            .collect();
        let denom = kappa + numerators.iter().sum::<f64>();
        for ((c, kp), num) in predicted.iter().zip(&parts).zip(&numerators) {
            let w = if denom > 0.0 { num / denom } else { 0.0 };
            let mean = c.mean() + &kp.gain * (&zv - &kp.predicted_meas);
            out.push(GaussianComponent::new(w, mean, kp.posterior_cov.clone())?);
        }
    }
    Ok(Intensity::new(out))
}

/// One new component per measurement, centered on it with the measurement
/// noise as covariance.
pub fn birth_from_measurements(
    measurements: &[Vector2<f64>],
    sensor: &SensorModel,
    cfg: &FilterConfig,
) -> Result<Vec<GaussianComponent>> {
    let r = &sensor.meas_noise;
    measurements
        .iter()
        .map(|z| match cfg.birth_velocity_variance {
            None => GaussianComponent::new_2d(
                cfg.birth_weight,
                [z.x, z.y],
                [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]],
            ),
            Some(v) => {
                let mean = DVector::from_vec(vec![z.x, z.y, 0.0, 0.0]);
                let mut cov = DMatrix::identity(4, 4) * v;
                cov.view_mut((0, 0), (2, 2)).copy_from(r);
                GaussianComponent::new(cfg.birth_weight, mean, cov)
            }
        })
        .collect()
}

/// Drops light components, then greedily merges around the heaviest
/// remaining one until no candidates are left or `max_components` exist.
///
/// The merge pass is repeated until it no longer changes the component
/// count, so the result is a fixed point of the reduction.
pub fn prune_merge(v: &Intensity, cfg: &FilterConfig) -> Result<Intensity> {
    let mut current: Vec<GaussianComponent> = v
        .iter()
        .filter(|c| c.weight() >= cfg.prune_weight)
        .cloned()
        .collect();
    loop {
        let before = current.len();
        current = merge_pass(current, cfg)?;
        if current.len() == before {
            return Ok(Intensity::new(current));
        }
    }
}

fn merge_pass(
    mut pool: Vec<GaussianComponent>,
    cfg: &FilterConfig,
) -> Result<Vec<GaussianComponent>> {
    let mut out = Vec::with_capacity(pool.len().min(cfg.max_components));
    while !pool.is_empty() && out.len() < cfg.max_components {
        let best = pool.iter().enumerate().fold(0, |best, (i, c)| {
            if c.weight() > pool[best].weight() {
                i
            } else {
                best
            }
        });
        let anchor = pool[best].clone();
        let (group, rest): (Vec<_>, Vec<_>) = pool
            .into_iter()
            .partition(|c| anchor.mahalanobis_sq_unchecked(c.mean()) <= cfg.merge_threshold);
        pool = rest;
        let merged = match cfg.merge_rule {
            MergeRule::Moment => merge_moment(&group)?,
            MergeRule::PlainAverage => merge_plain_average(&group)?,
        };
        out.push(merged);
    }
    out.sort_by(|a, b| b.weight().total_cmp(&a.weight()));
    Ok(out)
}

/// Components at or above `extract_weight`. A component carrying 1.5 or
/// more expected targets is emitted `round(w)` times, each with weight
/// `w / round(w)`.
pub fn extract_targets(v: &Intensity, cfg: &FilterConfig) -> Vec<TargetEstimate> {
    let mut out = Vec::new();
    for (i, c) in v.iter().enumerate() {
        let w = c.weight();
        if w < cfg.extract_weight {
            continue;
        }
        let copies = if w >= 1.5 {
            (w + 0.5).floor() as usize
        } else {
            1
        };
        for _ in 0..copies {
            out.push(TargetEstimate {
                weight: w / copies as f64,
                mean: c.mean().clone(),
                cov: c.cov().clone(),
                source: i,
            });
        }
    }
    out
}
