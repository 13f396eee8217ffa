// One filter cycle by hand: predict, update against a scan, prune/merge,
// extract, then add births for the next cycle. A component at the edge of
// the view that is not detected gets pushed outward.

use std::collections::HashMap;

use gmphd_sat::phd::{birth_from_measurements, extract_targets, predict, prune_merge, update};
use gmphd_sat::{
    FilterConfig, FovDisk, GaussianComponent, Intensity, LinearMotionModel, SensorModel,
};
use nalgebra::{Matrix2, Vector2};

fn show(label: &str, v: &Intensity) {
    println!(
        "{label}: {} components, total weight {:.3}",
        v.len(),
        v.total_weight()
    );
    for c in v.iter() {
        println!(
            "  w = {:.4}  mean = ({:7.3}, {:7.3})  trace = {:.3}",
            c.weight(),
            c.mean()[0],
            c.mean()[1],
            c.trace()
        );
    }
}

pub fn run_example() -> gmphd_sat::Result<()> {
    let robot = Vector2::new(50.0, 50.0);
    let sensor = SensorModel::new(FovDisk::new(robot, 25.0)?, 0.98, Matrix2::identity(), 0.1)?;
    let model = LinearMotionModel::random_walk(2, 0.05, 1.0)?;
    let cfg = FilterConfig::default();

    let prior = Intensity::new(vec![
        // Seen this scan.
        GaussianComponent::new_2d(1.0, [55.0, 48.0], [[4.0, 0.0], [0.0, 4.0]])?,
        // Straddles the edge of the view and is missed.
        GaussianComponent::new_2d(1.0, [74.0, 50.0], [[9.0, 0.0], [0.0, 9.0]])?,
        // Far away; untouched.
        GaussianComponent::new_2d(0.8, [120.0, 130.0], [[50.0, 0.0], [0.0, 50.0]])?,
    ]);
    let scan = vec![Vector2::new(55.6, 47.1), Vector2::new(40.0, 65.0)];

    show("prior", &prior);
    let predicted = predict(&prior, &model, &HashMap::new())?;
    let updated = update(&predicted, &scan, &sensor, &cfg)?;
    println!("update produced {} components", updated.len());
    let mut posterior = prune_merge(&updated, &cfg)?;
    show("pruned and merged", &posterior);

    for t in extract_targets(&posterior, &cfg) {
        println!(
            "target at ({:.2}, {:.2}) weight {:.3}",
            t.mean[0], t.mean[1], t.weight
        );
    }

    posterior.extend(birth_from_measurements(&scan, &sensor, &cfg)?);
    show("belief for the next step", &posterior);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("phd example failed");
}
