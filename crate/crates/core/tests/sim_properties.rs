use gmphd_sat::config::ClutterModel;
use gmphd_sat::sim::scenario::initial_targets;
use gmphd_sat::sim::{compute_metrics, sense, step_world, GroundTruthTarget, WorldMotion};
use gmphd_sat::{
    run_scenario, FovDisk, ScenarioConfig, SensorModel, TargetEstimate, TrackConfig, TrackManager,
    WorldBounds,
};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short(seed: u64, steps: u64, clutter: f64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        steps,
        clutter_rate: clutter,
        ..ScenarioConfig::default()
    }
}

#[test]
fn identical_seeds_give_identical_logs() {
    let mut cfg = short(17, 400, 0.2);
    cfg.stationary = false;
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.track_log.len(), b.track_log.len());
    for (x, y) in a.track_log.iter().zip(&b.track_log) {
        assert_eq!(format!("{x:?}"), format!("{y:?}"));
    }
    let c = run_scenario(&short(18, 400, 0.2)).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn metrics_are_never_nan() {
    for (seed, clutter, stationary) in [(1, 0.0, true), (2, 0.2, false), (3, 0.1, true)] {
        let mut cfg = short(seed, 800, clutter);
        cfg.stationary = stationary;
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.metrics.len(), 800);
        for m in &out.metrics {
            assert!(m.sum_w_components.is_finite() && m.sum_w_components >= 0.0);
            assert!(m.sum_w_tracks.is_finite() && m.sum_w_tracks >= 0.0);
            for v in [m.mahal_closest, m.mahal_second, m.worst_trace]
                .into_iter()
                .flatten()
            {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }
}

#[test]
fn moving_targets_stay_in_bounds() {
    let cfg = ScenarioConfig::default();
    let motion = WorldMotion {
        bounds: cfg.world,
        stationary: false,
    };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ts = initial_targets(&cfg, &mut rng);
        for k in 1..=7278 {
            step_world(&mut ts, &motion, &mut rng, k);
            assert!(
                ts.iter().all(|t| cfg.world.contains(&t.position)),
                "seed {seed} step {k}"
            );
        }
    }
}

#[test]
fn one_step_kinematics() {
    let motion = WorldMotion {
        bounds: WorldBounds::default(),
        stationary: false,
    };
    let mut ts = vec![GroundTruthTarget {
        position: Vector2::new(50.0, 50.0),
        speed: 0.05,
        heading: 0.0,
        direction_period: 400,
    }];
    step_world(&mut ts, &motion, &mut ChaCha8Rng::seed_from_u64(0), 1);
    assert!((ts[0].position - Vector2::new(50.05, 50.0)).norm() < 1e-12);
}

fn disk_sensor(pd: f64, noise: f64) -> SensorModel {
    SensorModel::new(
        FovDisk::new(Vector2::new(0.0, 0.0), 25.0).unwrap(),
        pd,
        Matrix2::identity() * noise,
        0.0,
    )
    .unwrap()
}

#[test]
fn sensing_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let far = [GroundTruthTarget {
        position: Vector2::new(30.0, 0.0),
        speed: 0.0,
        heading: 0.0,
        direction_period: 400,
    }];
    for _ in 0..1000 {
        assert!(sense(
            &far,
            &disk_sensor(1.0, 1.0),
            0.0,
            ClutterModel::Bernoulli,
            &mut rng
        )
        .is_empty());
    }
    let near = [GroundTruthTarget {
        position: Vector2::new(3.0, -4.0),
        ..far[0]
    }];
    let z = sense(
        &near,
        &disk_sensor(1.0, 1e-20),
        0.0,
        ClutterModel::Bernoulli,
        &mut rng,
    );
    assert_eq!(z.len(), 1);
    assert!((z[0] - near[0].position).norm() < 1e-8);
}

#[test]
fn clutter_frequency_matches_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sensor = disk_sensor(0.98, 1.0);
    let n = 100_000;
    let mut hits = 0usize;
    for _ in 0..n {
        let z = sense(&[], &sensor, 0.10, ClutterModel::Bernoulli, &mut rng);
        assert!(z.iter().all(|p| p.norm() <= 25.0));
        hits += z.len();
    }
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.10).abs() < 0.01, "clutter frequency {freq}");
}

// Known failure, kept runnable with `--ignored`: weight lost at the disk
// edge and merges between neighbours whose covariances have grown leave
// about five tracks at sweep end. See the README.
#[test]
#[ignore = "known failure: about five of ten targets confirmed at sweep end"]
fn sweep_confirms_nearly_all_targets_with_a_perfect_sensor() {
    let steps = gmphd_sat::planner::LawnmowerPath::new(&WorldBounds::default(), 30.0)
        .steps_for(1, 0.5) as u64;
    for seed in 0..3 {
        let mut cfg = short(seed, steps, 0.0);
        cfg.sensor.p_detect_given_in_fov = 1.0;
        let out = run_scenario(&cfg).unwrap();
        let last = out.metrics.last().unwrap();
        assert!(
            last.n_confirmed >= 9,
            "seed {seed}: {} confirmed",
            last.n_confirmed
        );
    }
}

// Brute force: every truth against every confirmed track, sorted.
fn oracle(truth: &[Vector2<f64>], tracks: &TrackManager) -> (Option<f64>, Option<f64>) {
    let confirmed: Vec<_> = tracks
        .tracks()
        .iter()
        .filter(|t| t.is_confirmed())
        .collect();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for x in truth {
        let mut ds: Vec<f64> = confirmed
            .iter()
            .map(|t| {
                let p = &t.latest().cov;
                let d = Vector2::new(x.x - t.latest().mean[0], x.y - t.latest().mean[1]);
                let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
                ((p[(1, 1)] * d.x * d.x - 2.0 * p[(0, 1)] * d.x * d.y + p[(0, 0)] * d.y * d.y)
                    / det)
                    .sqrt()
            })
            .collect();
        ds.sort_by(f64::total_cmp);
        if let Some(&a) = ds.first() {
            first.push(a);
        }
        if let Some(&b) = ds.get(1) {
            second.push(b);
        }
    }
    let mean = |v: &[f64]| {
        (!v.is_empty() && v.len() == truth.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    (mean(&first), mean(&second))
}

#[test]
fn no_confirmed_tracks_gives_absent_distances() {
    let tm = TrackManager::new(TrackConfig::default());
    let m = compute_metrics(
        0,
        &[Vector2::new(1.0, 1.0)],
        tm.tracks(),
        &gmphd_sat::Intensity::empty(),
    );
    assert_eq!(m.n_confirmed, 0);
    assert!(m.mahal_closest.is_none() && m.mahal_second.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closest_two_match_brute_force(
        tracks in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64, 0.5..10.0f64, 0.5..10.0f64, -0.8..0.8f64), 0..7),
        truth in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 1..6),
    ) {
        let mut tm = TrackManager::new(TrackConfig { l_threshold: 1, ..TrackConfig::default() });
        let targets: Vec<TargetEstimate> = tracks
            .iter()
            .map(|&(x, y, sx, sy, r)| TargetEstimate {
                weight: 1.0,
                mean: DVector::from_vec(vec![x, y]),
                cov: DMatrix::from_row_slice(2, 2, &[sx * sx, r * sx * sy, r * sx * sy, sy * sy]),
                source: 0,
            })
            .collect();
        tm.associate(&targets, 0);
        let truth: Vec<Vector2<f64>> = truth.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        let m = compute_metrics(0, &truth, tm.tracks(), &gmphd_sat::Intensity::empty());
        let (a, b) = oracle(&truth, &tm);
        match (m.mahal_closest, a) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y)),
            (x, y) => prop_assert_eq!(x, y),
        }
        match (m.mahal_second, b) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y)),
            (x, y) => prop_assert_eq!(x, y),
        }
    }
}
