// Paired batch runs with and without the no-detection push, written to a
// scratch directory the same way the command-line tool does.

use gmphd_sat::runner::{run_comparison, Comparison};
use gmphd_sat::ScenarioConfig;

pub fn run_with(steps: u64, seeds: &[u64]) -> gmphd_sat::Result<()> {
    let cfg = ScenarioConfig {
        name: "push-ablation".into(),
        steps,
        clutter_rate: 0.1,
        ..ScenarioConfig::default()
    };
    let out = std::env::temp_dir().join(format!("gmphd-sat-push-ablation-{}", std::process::id()));
    let report = run_comparison(Comparison::Push, &cfg, seeds, &out)?;
    for arm in &report.arms {
        let t = &arm.summary.table.full;
        println!(
            "{:8} confirmed {:.2} (sd {:.2})  closest {:.2} (sd {:.2})",
            arm.label, t.tracks.mean, t.tracks.std, t.mahal_closest.mean, t.mahal_closest.std
        );
    }
    println!("artefacts in {}", out.display());
    std::fs::remove_dir_all(&out).map_err(|e| gmphd_sat::Error::io(&out, e))
}

pub fn run_example() -> gmphd_sat::Result<()> {
    run_with(300, &[0, 1])
}

#[allow(dead_code)]
fn main() {
    let steps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2400);
    run_with(steps, &[0, 1, 2, 3, 4]).expect("comparison failed");
}
