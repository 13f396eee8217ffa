// The closed loop: a robot sweeps the world with a 25 m view, ten targets
// wait to be found, and the filter, extractor and track manager run every
// step. Pass a step count to run longer (the full scenario is 7278).

use gmphd_sat::sim::metrics::RunSummary;
use gmphd_sat::{ScenarioConfig, Simulation};

pub fn run_steps(steps: u64) -> gmphd_sat::Result<()> {
    let cfg = ScenarioConfig {
        steps,
        clutter_rate: 0.1,
        ..ScenarioConfig::default()
    };
    let mut sim = Simulation::new(cfg)?;
    let mut records = Vec::new();
    while !sim.is_finished() {
        let report = sim.step()?;
        let m = &report.metrics;
        if m.step % 200 == 0 {
            println!(
                "step {:5}: robot ({:6.1}, {:6.1}) components {:3} confirmed {:2} sum w {:6.2} closest {}",
                m.step,
                report.event.robot.x,
                report.event.robot.y,
                m.n_components,
                m.n_confirmed,
                m.sum_w_components,
                m.mahal_closest.map_or("-".to_string(), |d| format!("{d:.2}"))
            );
        }
        records.push(report.metrics);
    }
    let s = RunSummary::from_records(&records);
    println!(
        "averages: confirmed {:.2}, components {:.2}, distance to closest {:.2}",
        s.n_confirmed.mean, s.n_components.mean, s.mahal_closest.mean
    );
    Ok(())
}

pub fn run_example() -> gmphd_sat::Result<()> {
    run_steps(600)
}

#[allow(dead_code)]
fn main() {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2400);
    run_steps(steps).expect("simulation failed");
}
