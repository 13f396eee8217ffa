//! Oracle checks shared by the property suites and the acceptance run.

#![allow(dead_code)]

use std::collections::HashMap;
use std::time::Instant;

use gmphd_sat::gp::{
    fit_hyperparams, log_marginal_likelihood, predict_displacement, predict_track, GpBounds,
    GpHyperparams, GpModel,
};
use gmphd_sat::phd::{predict, update};
use gmphd_sat::{
    prob_in_fov, FilterConfig, FovDisk, GaussianComponent, Intensity, LinearMotionModel,
    SensorModel,
};
use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Standalone Kalman filter on plain 2x2 arrays.
struct Kf {
    m: [f64; 2],
    p: [[f64; 2]; 2],
}

pub fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn tr(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn inv(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

impl Kf {
    fn predict(&mut self, f: [[f64; 2]; 2], q: [[f64; 2]; 2]) {
        let m = [
            f[0][0] * self.m[0] + f[0][1] * self.m[1],
            f[1][0] * self.m[0] + f[1][1] * self.m[1],
        ];
        let fp = mul(mul(f, self.p), tr(f));
        self.m = m;
        self.p = [
            [fp[0][0] + q[0][0], fp[0][1] + q[0][1]],
            [fp[1][0] + q[1][0], fp[1][1] + q[1][1]],
        ];
    }

    fn update(&mut self, z: [f64; 2], r: [[f64; 2]; 2]) {
        let s = [
            [self.p[0][0] + r[0][0], self.p[0][1] + r[0][1]],
            [self.p[1][0] + r[1][0], self.p[1][1] + r[1][1]],
        ];
        let k = mul(self.p, inv(s));
        let v = [z[0] - self.m[0], z[1] - self.m[1]];
        self.m = [
            self.m[0] + k[0][0] * v[0] + k[0][1] * v[1],
            self.m[1] + k[1][0] * v[0] + k[1][1] * v[1],
        ];
        let ikp = [[1.0 - k[0][0], -k[0][1]], [-k[1][0], 1.0 - k[1][1]]];
        self.p = mul(ikp, self.p);
        self.p = [
            [self.p[0][0], 0.5 * (self.p[0][1] + self.p[1][0])],
            [0.5 * (self.p[0][1] + self.p[1][0]), self.p[1][1]],
        ];
    }
}

pub struct KalmanCheck {
    /// Largest absolute deviation in mean, covariance or weight over all
    /// steps. Infinite if the mixture ever had an unexpected shape.
    pub max_error: f64,
    pub seconds: f64,
}

/// One component, one target, one measurement per step for 100 steps,
/// against the Kalman filter above.
pub fn kalman_equivalence() -> KalmanCheck {
    let start = Instant::now();
    let f = [[1.0, 0.02], [-0.01, 0.99]];
    let q = [[0.3, 0.05], [0.05, 0.2]];
    let model = LinearMotionModel::new(
        DMatrix::from_row_slice(2, 2, &[f[0][0], f[0][1], f[1][0], f[1][1]]),
        DMatrix::from_row_slice(2, 2, &[q[0][0], q[0][1], q[1][0], q[1][1]]),
        1.0,
    )
    .unwrap();
    // A disk so large that p(F) is 1 in floating point.
    let sensor = SensorModel::new(
        FovDisk::new(Vector2::zeros(), 1e7).unwrap(),
        1.0,
        Matrix2::identity(),
        0.0,
    )
    .unwrap();
    let cfg = FilterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut truth = [3.0, -2.0];
    let mut kf = Kf {
        m: [0.0, 0.0],
        p: [[10.0, 0.0], [0.0, 10.0]],
    };
    let mut v = Intensity::new(vec![GaussianComponent::new_2d(
        1.0,
        [0.0, 0.0],
        [[10.0, 0.0], [0.0, 10.0]],
    )
    .unwrap()]);
    let mut err: f64 = 0.0;
    for _ in 0..100 {
        truth = [
            truth[0] + rng.random_range(-1.0..1.0),
            truth[1] + rng.random_range(-1.0..1.0),
        ];
        let z = [
            truth[0] + rng.random_range(-1.0..1.0),
            truth[1] + rng.random_range(-1.0..1.0),
        ];
        kf.predict(f, q);
        kf.update(z, [[1.0, 0.0], [0.0, 1.0]]);

        let predicted = predict(&v, &model, &HashMap::new()).unwrap();
        let post = update(&predicted, &[Vector2::new(z[0], z[1])], &sensor, &cfg).unwrap();
        if post.len() != 2 {
            err = f64::INFINITY;
            break;
        }
        // Missed-detection copy first, then the detection term.
        err = err.max(post.components()[0].weight());
        let c = post.components()[1].clone();
        err = err.max((c.weight() - 1.0).abs());
        for i in 0..2 {
            err = err.max((c.mean()[i] - kf.m[i]).abs());
            for j in 0..2 {
                err = err.max((c.cov()[(i, j)] - kf.p[i][j]).abs());
            }
        }
        v = Intensity::new(vec![c]);
    }
    KalmanCheck {
        max_error: err,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub struct FovCheck {
    pub max_mc_gap: f64,
    pub max_rayleigh_error: f64,
    pub seconds: f64,
}

/// 20 random correlated components against 10^6 samples each, plus the
/// isotropic closed form.
pub fn fov_oracle() -> FovCheck {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let fov = FovDisk::new(Vector2::zeros(), 25.0).unwrap();
    let n = 1_000_000;
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        let sx = rng.random_range(3.0..20.0);
        let sy = rng.random_range(3.0..20.0);
        let mut rho: f64 = rng.random_range(-0.9..0.9);
        if rho.abs() < 0.1 {
            rho = 0.5;
        }
        let m = [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)];
        let cxy = rho * sx * sy;
        let c = GaussianComponent::new_2d(1.0, m, [[sx * sx, cxy], [cxy, sy * sy]]).unwrap();
        let quad = prob_in_fov(&c, &fov).unwrap();
        let normal = rand_distr::StandardNormal;
        let mut inside = 0usize;
        for _ in 0..n {
            let a: f64 = rng.sample(normal);
            let b: f64 = rng.sample(normal);
            let x = m[0] + sx * a;
            let y = m[1] + sy * (rho * a + (1.0 - rho * rho).sqrt() * b);
            if x * x + y * y <= 625.0 {
                inside += 1;
            }
        }
        gap = gap.max((quad - inside as f64 / n as f64).abs());
    }
    FovCheck {
        max_mc_gap: gap,
        max_rayleigh_error: rayleigh_max_error(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Largest error against 1 - exp(-r^2 / 2 s^2) for isotropic components
/// centred on the disk.
pub fn rayleigh_max_error() -> f64 {
    let mut err: f64 = 0.0;
    for (r, s) in [
        (25.0, 5.0),
        (25.0, 10.0),
        (25.0, 20.0),
        (3.0, 1.5),
        (10.0, 40.0),
    ] {
        let c = GaussianComponent::new_2d(1.0, [7.0, -3.0], [[s * s, 0.0], [0.0, s * s]]).unwrap();
        let p = prob_in_fov(&c, &FovDisk::new(Vector2::new(7.0, -3.0), r).unwrap()).unwrap();
        err = err.max((p - (1.0 - (-(r * r) / (2.0 * s * s)).exp())).abs());
    }
    err
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn model_1d(hp: GpHyperparams, times: &[f64], values: &[f64]) -> GpModel {
    GpModel::new(vec![hp], times.to_vec(), vec![values.to_vec()]).unwrap()
}

/// (GP, last-two-point line) horizon-10 RMSE on a sine, per phase.
pub fn sine_extrapolation() -> Vec<(f64, f64)> {
    [0.0, 0.7, 1.9, 3.1, 4.4]
        .into_iter()
        .map(|phase| {
            let f = |t: f64| 5.0 * (2.0 * std::f64::consts::PI * t / 100.0 + phase).sin();
            let times: Vec<f64> = (0..50).map(f64::from).collect();
            let ys: Vec<f64> = times.iter().map(|&t| f(t)).collect();
            let set: Vec<(f64, f64)> = times.iter().copied().zip(ys.iter().copied()).collect();
            let hp = fit_hyperparams(&set, &GpBounds::default()).unwrap();
            let pred = predict_track(&model_1d(hp, &times, &ys), 10).unwrap();
            let gp: Vec<f64> = pred.iter().map(|p| p.mean[0]).collect();
            let slope = ys[49] - ys[48];
            let line: Vec<f64> = (1..=10).map(|h| ys[49] + slope * h as f64).collect();
            let truth: Vec<f64> = (1..=10).map(|h| f(49.0 + h as f64)).collect();
            (rmse(&gp, &truth), rmse(&line, &truth))
        })
        .collect()
}

pub struct LineCheck {
    pub one_step_error: f64,
    pub slope_error: f64,
    pub displacement_variance: f64,
}

/// Noiseless ramp 2 + 0.3 t sampled at t = 0..49.
pub fn noiseless_line() -> LineCheck {
    let hp = GpHyperparams::new(1e4, 1e3, 1e-8).unwrap();
    let times: Vec<f64> = (0..50).map(f64::from).collect();
    let ys: Vec<f64> = times.iter().map(|&t| 2.0 + 0.3 * t).collect();
    let model = model_1d(hp, &times, &ys);
    let p = predict_track(&model, 1).unwrap();
    let d = predict_displacement(&model).unwrap();
    LineCheck {
        one_step_error: (p[0].mean[0] - (2.0 + 0.3 * 50.0)).abs(),
        slope_error: (d.mean[0] - 0.3).abs(),
        displacement_variance: d.variance[0],
    }
}

/// Number of grid points scoring above the fitted optimum, over three
/// noisy cosine data sets. Zero means the fit dominates.
pub fn grid_violations() -> usize {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let bounds = GpBounds::default();
    let mut bad = 0;
    for case in 0..3 {
        let set: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let t = i as f64;
                (
                    t,
                    4.0 * (t / (6.0 + 4.0 * case as f64)).cos() + noise.sample(&mut rng),
                )
            })
            .collect();
        let best = fit_hyperparams(&set, &bounds).unwrap();
        let best_lml = log_marginal_likelihood(&set, &best).unwrap();
        let [sg, lg, ng] = bounds.grid();
        for &s in &sg {
            for &l in &lg {
                for &n in &ng {
                    let hp = GpHyperparams::new(s, l, n).unwrap();
                    if let Ok(v) = log_marginal_likelihood(&set, &hp) {
                        if v > best_lml {
                            bad += 1;
                        }
                    }
                }
            }
        }
    }
    bad
}
