//! Per-coordinate Gaussian-process extrapolation of track histories.
//!
//! Each coordinate is regressed independently against the time step with
//! a squared-exponential kernel. Windows are de-meaned before regression,
//! which amounts to a constant-mean prior.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest history window used for prediction.
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn new(signal_variance: f64, length_scale: f64, noise_variance: f64) -> Result<Self> {
        let hp = Self {
            signal_variance,
            length_scale,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    fn kernel(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length_scale;
        self.signal_variance * (-0.5 * d * d).exp()
    }
}

/// Search box for hyperparameter fitting. Each range is `(low, high)`;
/// the grid is log-spaced with `grid_points` values per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpBounds {
    pub signal_variance: (f64, f64),
    pub length_scale: (f64, f64),
    pub noise_variance: (f64, f64),
    pub grid_points: usize,
}

impl Default for GpBounds {
    fn default() -> Self {
        Self {
            signal_variance: (1e-2, 1e4),
            length_scale: (1.0, 1e3),
            noise_variance: (1e-6, 10.0),
            grid_points: 9,
        }
    }
}

impl GpBounds {
    pub fn validate(&self) -> Result<()> {
        for (key, (lo, hi)) in [
            ("gp.bounds.signal_variance", self.signal_variance),
            ("gp.bounds.length_scale", self.length_scale),
            ("gp.bounds.noise_variance", self.noise_variance),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(
                    key,
                    format!("need 0 < low <= high, got ({lo}, {hi})"),
                ));
            }
        }
        if self.grid_points < 2 {
            return Err(Error::config(
                "gp.bounds.grid_points",
                "need at least 2 grid points",
            ));
        }
        Ok(())
    }

    /// The log-spaced grid for each parameter, in (signal, length, noise) order.
    pub fn grid(&self) -> [Vec<f64>; 3] {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let n = self.grid_points;
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        };
        [
            axis(self.signal_variance),
            axis(self.length_scale),
            axis(self.noise_variance),
        ]
    }
}

fn centered(values: &[f64]) -> (f64, DVector<f64>) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (
        mean,
        DVector::from_iterator(values.len(), values.iter().map(|v| v - mean)),
    )
}

fn kernel_matrix(times: &[f64], hp: &GpHyperparams, extra_diag: f64) -> DMatrix<f64> {
    let n = times.len();
    DMatrix::from_fn(n, n, |i, j| {
        let k = hp.kernel(times[i], times[j]);
        if i == j {
            k + hp.noise_variance + extra_diag
        } else {
            k
        }
    })
}

/// Cholesky of the training covariance, adding `1e-8 * signal_variance`
/// of jitter once if the plain matrix is not positive definite.
fn factor(times: &[f64], hp: &GpHyperparams) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(kernel_matrix(times, hp, 0.0)) {
        return Ok(c);
    }
    Cholesky::new(kernel_matrix(times, hp, 1e-8 * hp.signal_variance)).ok_or(Error::GpSingular)
}

/// Log marginal likelihood of the de-meaned samples under `hp`.
pub fn log_marginal_likelihood(samples: &[(f64, f64)], hp: &GpHyperparams) -> Result<f64> {
    let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (_, y) = centered(&values);
    let chol = factor(&times, hp)?;
    let alpha = chol.solve(&y);
    let l = chol.l_dirty();
    let log_det: f64 = (0..times.len()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let n = times.len() as f64;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

fn lml_or_neg_inf(samples: &[(f64, f64)], hp: &GpHyperparams) -> f64 {
    log_marginal_likelihood(samples, hp).unwrap_or(f64::NEG_INFINITY)
}

/// Maximizes the log marginal likelihood: a full scan of the log grid,
/// then coordinate-wise golden-section refinement from the best few grid
/// points. Deterministic for a given grid; the result never scores below
/// the best grid point.
pub fn fit_hyperparams(trainset: &[(f64, f64)], bounds: &GpBounds) -> Result<GpHyperparams> {
    bounds.validate()?;
    if trainset.len() < 5 {
        return Err(Error::GpFit(format!(
            "need at least 5 samples, got {}",
            trainset.len()
        )));
    }
    if trainset
        .iter()
        .any(|(t, y)| !t.is_finite() || !y.is_finite())
    {
        return Err(Error::GpFit("non-finite sample".into()));
    }
    let t0 = trainset[0].0;
    if trainset.iter().all(|(t, _)| *t == t0) {
        return Err(Error::GpFit("all sample times are equal".into()));
    }

    let [sg, lg, ng] = bounds.grid();
    let mut scored = Vec::with_capacity(sg.len() * lg.len() * ng.len());
    for &s in &sg {
        for &l in &lg {
            for &n in &ng {
                let hp = GpHyperparams {
                    signal_variance: s,
                    length_scale: l,
                    noise_variance: n,
                };
                scored.push((lml_or_neg_inf(trainset, &hp), hp));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    if !scored[0].0.is_finite() {
        return Err(Error::GpFit("no grid point has a finite likelihood".into()));
    }

    let lo = [
        bounds.signal_variance.0.ln(),
        bounds.length_scale.0.ln(),
        bounds.noise_variance.0.ln(),
    ];
    let hi = [
        bounds.signal_variance.1.ln(),
        bounds.length_scale.1.ln(),
        bounds.noise_variance.1.ln(),
    ];
    let step = [
        (hi[0] - lo[0]) / (bounds.grid_points - 1) as f64,
        (hi[1] - lo[1]) / (bounds.grid_points - 1) as f64,
        (hi[2] - lo[2]) / (bounds.grid_points - 1) as f64,
    ];

    let mut best = scored[0];
    for &(score, hp) in scored.iter().take(3) {
        let mut x = [
            hp.signal_variance.ln(),
            hp.length_scale.ln(),
            hp.noise_variance.ln(),
        ];
        let mut fx = score;
        for _sweep in 0..4 {
            let mut improved = false;
            for k in 0..3 {
                let a = (x[k] - step[k]).max(lo[k]);
                let b = (x[k] + step[k]).min(hi[k]);
                if b <= a {
                    continue;
                }
                let f = |v: f64| {
                    let mut y = x;
                    y[k] = v;
                    lml_or_neg_inf(trainset, &from_log(y))
                };
                let (v, fv) = golden_max(f, a, b, 30);
                if fv > fx {
                    x[k] = v;
                    fx = fv;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if fx > best.0 {
            best = (fx, from_log(x));
        }
    }
    Ok(best.1)
}

fn from_log(x: [f64; 3]) -> GpHyperparams {
    GpHyperparams {
        signal_variance: x[0].exp(),
        length_scale: x[1].exp(),
        noise_variance: x[2].exp(),
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // The optimum often sits on the box boundary.
    [(c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((c, f64::NEG_INFINITY), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
}

/// One horizon step of a prediction: per-coordinate mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPrediction {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

impl GpPrediction {
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.variance)
    }
}

/// Hyperparameters per coordinate plus the training window.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: Vec<GpHyperparams>,
    times: Vec<f64>,
    coords: Vec<Vec<f64>>,
}

impl GpModel {
    /// `coords[k]` holds the k-th coordinate at each of `times`.
    pub fn new(hyper: Vec<GpHyperparams>, times: Vec<f64>, coords: Vec<Vec<f64>>) -> Result<Self> {
        if hyper.len() != coords.len() || hyper.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} hyperparameter sets for {} coordinates",
                hyper.len(),
                coords.len()
            )));
        }
        for hp in &hyper {
            hp.validate()?;
        }
        if coords.iter().any(|c| c.len() != times.len()) {
            return Err(Error::DimensionMismatch(
                "coordinate and time lengths differ".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "window times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            hyper,
            times,
            coords,
        })
    }

    /// Builds the window from the most recent `window` points of a
    /// `(time, position)` history.
    pub fn from_history<'a, I>(hyper: Vec<GpHyperparams>, history: I, window: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a [f64])>,
    {
        let points: Vec<(f64, &[f64])> = history.into_iter().collect();
        let start = points.len().saturating_sub(window);
        let d = hyper.len();
        let mut times = Vec::with_capacity(points.len() - start);
        let mut coords = vec![Vec::with_capacity(points.len() - start); d];
        for (t, x) in &points[start..] {
            if x.len() < d {
                return Err(Error::DimensionMismatch("history point too short".into()));
            }
            times.push(*t);
            for k in 0..d {
                coords[k].push(x[k]);
            }
        }
        Self::new(hyper, times, coords)
    }

    pub fn dim(&self) -> usize {
        self.hyper.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Latent posterior mean and variance at `t_last + offset` for each
/// offset; `with_noise` adds the observation noise to the variance.
fn posterior_at(model: &GpModel, offsets: &[f64], with_noise: bool) -> Result<Vec<GpPrediction>> {
    if model.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "prediction needs at least 2 window points, got {}",
            model.len()
        )));
    }
    let t_last = *model.times.last().expect("nonempty window");
    // Shift so the last sample sits at 0; the kernel only sees differences.
    let times: Vec<f64> = model.times.iter().map(|t| t - t_last).collect();
    let d = model.dim();
    let mut means = vec![DVector::zeros(d); offsets.len()];
    let mut vars = vec![DVector::zeros(d); offsets.len()];

    for k in 0..d {
        let hp = &model.hyper[k];
        let (offset, y) = centered(&model.coords[k]);
        let chol = factor(&times, hp)?;
        let alpha = chol.solve(&y);
        for (h, &t) in offsets.iter().enumerate() {
            let kstar =
                DVector::from_iterator(times.len(), times.iter().map(|&ti| hp.kernel(ti, t)));
            let v = chol
                .l_dirty()
                .solve_lower_triangular(&kstar)
                .ok_or(Error::GpSingular)?;
            means[h][k] = offset + kstar.dot(&alpha);
            let noise = if with_noise { hp.noise_variance } else { 0.0 };
            vars[h][k] = (hp.signal_variance - v.norm_squared()).max(0.0) + noise;
        }
    }
    Ok(means
        .into_iter()
        .zip(vars)
        .map(|(mean, variance)| GpPrediction { mean, variance })
        .collect())
}

/// Posterior mean and predictive variance (including observation noise)
/// at `t_last + h` for `h = 1..=horizon`.
pub fn predict_track(model: &GpModel, horizon: usize) -> Result<Vec<GpPrediction>> {
    let offsets: Vec<f64> = (1..=horizon).map(|h| h as f64).collect();
    posterior_at(model, &offsets, true)
}

/// One-step motion learned from the window: the change of the latent
/// function from the last sample time to the next step, with the
/// posterior variance of that change.
pub fn predict_displacement(model: &GpModel) -> Result<GpPrediction> {
    if model.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "prediction needs at least 2 window points, got {}",
            model.len()
        )));
    }
    let t_last = *model.times.last().expect("nonempty window");
    let times: Vec<f64> = model.times.iter().map(|t| t - t_last).collect();
    let d = model.dim();
    let mut mean = DVector::zeros(d);
    let mut variance = DVector::zeros(d);
    for k in 0..d {
        let hp = &model.hyper[k];
        let (_, y) = centered(&model.coords[k]);
        let chol = factor(&times, hp)?;
        let alpha = chol.solve(&y);
        let kvec =
            |t: f64| DVector::from_iterator(times.len(), times.iter().map(|&ti| hp.kernel(ti, t)));
        let (k0, k1) = (kvec(0.0), kvec(1.0));
        let l = chol.l_dirty();
        let v0 = l.solve_lower_triangular(&k0).ok_or(Error::GpSingular)?;
        let v1 = l.solve_lower_triangular(&k1).ok_or(Error::GpSingular)?;
        mean[k] = (&k1 - &k0).dot(&alpha);
        let prior = 2.0 * (hp.signal_variance - hp.kernel(0.0, 1.0));
        variance[k] = (prior - (&v1 - &v0).norm_squared()).max(0.0);
    }
    Ok(GpPrediction { mean, variance })
}

/// Reads a `t,x,y` training trajectory; a header row is optional.
pub fn read_training_trajectory(path: &std::path::Path) -> Result<Vec<(f64, [f64; 2])>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::GpFit(format!(
                "{}: row {} has {} columns, expected t,x,y",
                path.display(),
                line + 1,
                rec.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.push((v[0], [v[1], v[2]])),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::GpFit(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(out)
}
