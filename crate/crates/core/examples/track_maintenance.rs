// Tracks from unlabeled target estimates: two targets cross paths, a third
// appears briefly, and a fourth is seen once and then disappears.

use gmphd_sat::phd::TargetEstimate;
use gmphd_sat::{TrackConfig, TrackManager};
use nalgebra::{DMatrix, DVector};

fn estimate(x: f64, y: f64) -> TargetEstimate {
    TargetEstimate {
        weight: 1.0,
        mean: DVector::from_column_slice(&[x, y]),
        cov: DMatrix::identity(2, 2),
        source: 0,
    }
}

pub fn run_example() -> gmphd_sat::Result<()> {
    let cfg = TrackConfig::default();
    cfg.validate()?;
    let mut manager = TrackManager::new(cfg);

    for step in 1..=20u64 {
        let s = step as f64;
        let mut targets = vec![
            estimate(10.0 + 0.5 * s, 10.0),
            estimate(20.0 - 0.5 * s, 12.0),
        ];
        if (5..=12).contains(&step) {
            targets.push(estimate(60.0, 60.0 + 0.2 * s));
        }
        if step == 3 {
            targets.push(estimate(100.0, 5.0));
        }
        manager.associate(&targets, step);
        if step % 5 == 0 {
            let confirmed: Vec<u64> = manager.confirmed().iter().map(|t| t.id()).collect();
            println!(
                "step {step:2}: {} live tracks, confirmed {confirmed:?}",
                manager.tracks().len()
            );
        }
    }
    for t in manager.tracks() {
        let p = t.latest();
        println!(
            "track {}: {:9} length {:2}, last at ({:.1}, {:.1}) step {}",
            t.id(),
            t.status().as_str(),
            t.life_length(),
            p.mean[0],
            p.mean[1],
            p.step
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("track example failed");
}
