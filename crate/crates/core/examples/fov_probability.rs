// Probability that a Gaussian component lies inside the sensor's circular
// field of view, checked against sampling and the isotropic closed form.

use gmphd_sat::fov::{prob_detection, prob_in_fov};
use gmphd_sat::{FovDisk, GaussianComponent};
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sampled(c: &GaussianComponent, fov: &FovDisk, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let cov = Matrix2::new(
        c.cov()[(0, 0)],
        c.cov()[(0, 1)],
        c.cov()[(1, 0)],
        c.cov()[(1, 1)],
    );
    let l = cov.cholesky().expect("covariance is SPD").l();
    let hits = (0..n)
        .filter(|_| {
            let e = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            fov.contains(&(c.position() + l * e))
        })
        .count();
    hits as f64 / n as f64
}

pub fn run_example() -> gmphd_sat::Result<()> {
    let fov = FovDisk::new(Vector2::new(0.0, 0.0), 25.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let sigma: f64 = 12.0;
    let centered = GaussianComponent::new_2d(
        1.0,
        [0.0, 0.0],
        [[sigma * sigma, 0.0], [0.0, sigma * sigma]],
    )?;
    let closed = 1.0 - (-(25.0f64 * 25.0) / (2.0 * sigma * sigma)).exp();
    println!(
        "centered, sigma = {sigma}: p(F) = {:.8}  closed form {closed:.8}",
        prob_in_fov(&centered, &fov)?
    );

    let cases = [
        ([10.0, -5.0], [[40.0, 25.0], [25.0, 30.0]]),
        ([24.0, 3.0], [[4.0, -1.5], [-1.5, 9.0]]),
        ([30.0, 30.0], [[100.0, 0.0], [0.0, 10.0]]),
    ];
    for (mean, cov) in cases {
        let c = GaussianComponent::new_2d(1.0, mean, cov)?;
        let p = prob_in_fov(&c, &fov)?;
        let mc = sampled(&c, &fov, 200_000, &mut rng);
        let pd = prob_detection(&c, &fov, 0.98)?;
        println!("mean {mean:?}: p(F) = {p:.5}  sampled {mc:.5}  p_D = {pd:.5}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("fov example failed");
}
