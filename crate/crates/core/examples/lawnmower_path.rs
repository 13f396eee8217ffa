// The sweep path and the first moves of each planning strategy from the
// same belief.

use gmphd_sat::planner::{LawnmowerPath, RobotState, SpreadMeasure};
use gmphd_sat::{GaussianComponent, Intensity, Planner, PlannerConfig, Strategy, WorldBounds};
use nalgebra::Vector2;

pub fn run_example() -> gmphd_sat::Result<()> {
    let bounds = WorldBounds::default();
    for spacing in [30.0, 50.0] {
        let path = LawnmowerPath::new(&bounds, spacing);
        println!(
            "lane spacing {spacing}: {} lanes, loop {:.0} m, three sweeps take {} steps at 0.5 m/step",
            path.lane_count(),
            path.length(),
            path.steps_for(3, 0.5)
        );
    }

    let belief = Intensity::new(vec![
        GaussianComponent::new_2d(1.0, [20.0, 10.0], [[2.0, 0.0], [0.0, 2.0]])?,
        GaussianComponent::new_2d(1.0, [120.0, 140.0], [[80.0, 0.0], [0.0, 60.0]])?,
    ]);
    for strategy in [
        Strategy::Lawnmower,
        Strategy::NearestGaussian,
        Strategy::LargestGaussian,
    ] {
        let cfg = PlannerConfig {
            strategy,
            spread: SpreadMeasure::Trace,
            ..PlannerConfig::default()
        };
        cfg.validate(25.0)?;
        let planner = Planner::new(cfg);
        let mut robot = RobotState {
            position: Vector2::new(0.0, 0.0),
            speed: 0.5,
        };
        for step in 0..40 {
            robot.position = planner.next_position(&robot, &belief, step);
        }
        println!(
            "{:17} after 40 steps: ({:.2}, {:.2})",
            strategy.as_str(),
            robot.position.x,
            robot.position.y
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("planner example failed");
}
