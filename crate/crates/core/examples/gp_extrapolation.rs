// Learn GP hyperparameters from a noisy curved trajectory and extrapolate
// it ten steps ahead, next to a straight-line extrapolation.

use gmphd_sat::gp::{fit_hyperparams, predict_track, GpBounds, GpModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> gmphd_sat::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let path = |t: f64| [0.5 * t, 20.0 * (t / 15.0).sin()];

    let times: Vec<f64> = (0..50).map(f64::from).collect();
    let obs: Vec<[f64; 2]> = times
        .iter()
        .map(|&t| {
            let p = path(t);
            [p[0] + noise.sample(&mut rng), p[1] + noise.sample(&mut rng)]
        })
        .collect();

    let bounds = GpBounds::default();
    let hyper = (0..2)
        .map(|k| {
            let axis: Vec<(f64, f64)> = times.iter().zip(&obs).map(|(t, p)| (*t, p[k])).collect();
            fit_hyperparams(&axis, &bounds)
        })
        .collect::<gmphd_sat::Result<Vec<_>>>()?;
    for (axis, h) in ["x", "y"].iter().zip(&hyper) {
        println!(
            "{axis}: signal variance {:.3}, length scale {:.2}, noise variance {:.2e}",
            h.signal_variance, h.length_scale, h.noise_variance
        );
    }

    let model = GpModel::new(
        hyper,
        times.clone(),
        (0..2).map(|k| obs.iter().map(|p| p[k]).collect()).collect(),
    )?;
    let predictions = predict_track(&model, 10)?;
    let n = obs.len();
    let velocity = [obs[n - 1][0] - obs[n - 2][0], obs[n - 1][1] - obs[n - 2][1]];
    for (h, p) in predictions.iter().enumerate() {
        let step = (h + 1) as f64;
        let truth = path(times[n - 1] + step);
        let line = [
            obs[n - 1][0] + step * velocity[0],
            obs[n - 1][1] + step * velocity[1],
        ];
        println!(
            "+{:2}: gp ({:6.2}, {:6.2}) sd ({:.2}, {:.2})  line ({:6.2}, {:6.2})  truth ({:6.2}, {:6.2})",
            h + 1,
            p.mean[0],
            p.mean[1],
            p.variance[0].sqrt(),
            p.variance[1].sqrt(),
            line[0],
            line[1],
            truth[0],
            truth[1]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("gp example failed");
}
