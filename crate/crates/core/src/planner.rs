//! Robot motion: a fixed boustrophedon sweep, or greedy pursuit of a
//! mixture component.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Intensity;

/// Axis-aligned rectangular world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Default for WorldBounds {
    fn default() -> Self {
        Self {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 150.0,
            max_y: 150.0,
        }
    }
}

impl WorldBounds {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.max_x <= self.min_x || self.max_y <= self.min_y {
            return Err(Error::config(
                "world",
                "bounds must be finite with min < max",
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn clamp(&self, p: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            p.x.clamp(self.min_x, self.max_x),
            p.y.clamp(self.min_y, self.max_y),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Lawnmower,
    NearestGaussian,
    LargestGaussian,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Lawnmower => "lawnmower",
            Strategy::NearestGaussian => "nearest_gaussian",
            Strategy::LargestGaussian => "largest_gaussian",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "lawnmower" | "lawn_mower" => Ok(Strategy::Lawnmower),
            "nearest_gaussian" | "nearest" => Ok(Strategy::NearestGaussian),
            "largest_gaussian" | "largest" => Ok(Strategy::LargestGaussian),
            other => Err(Error::config(
                "planner.strategy",
                format!("unknown strategy `{other}`"),
            )),
        }
    }
}

/// Scalarization of a covariance for `largest_gaussian`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadMeasure {
    Trace,
    Determinant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Vector2<f64>,
    /// Meters per step.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub strategy: Strategy,
    /// Distance between sweep lanes (m).
    pub lane_spacing: f64,
    /// Robot speed (m per step).
    pub speed: f64,
    pub spread: SpreadMeasure,
    #[serde(skip)]
    pub bounds: WorldBounds,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Lawnmower,
            lane_spacing: 30.0,
            speed: 0.5,
            spread: SpreadMeasure::Trace,
            bounds: WorldBounds::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, fov_radius: f64) -> Result<()> {
        if !(self.lane_spacing > 0.0) {
            return Err(Error::config("planner.lane_spacing", "must be positive"));
        }
        if self.lane_spacing > 2.0 * fov_radius {
            return Err(Error::config(
                "planner.lane_spacing",
                format!("must not exceed the FOV diameter {}", 2.0 * fov_radius),
            ));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::config("planner.speed", "must be positive"));
        }
        Ok(())
    }
}

/// Closed boustrophedon loop: horizontal lanes from the bottom edge up,
/// `lane_spacing` apart with a final lane on the top edge, then straight
/// back to the start corner.
#[derive(Debug, Clone)]
pub struct LawnmowerPath {
    waypoints: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
}

impl LawnmowerPath {
    pub fn new(bounds: &WorldBounds, lane_spacing: f64) -> Self {
        let mut lanes = Vec::new();
        let mut y = bounds.min_y;
        while y < bounds.max_y - 1e-9 {
            lanes.push(y);
            y += lane_spacing;
        }
        lanes.push(bounds.max_y);

        let mut waypoints = Vec::with_capacity(2 * lanes.len() + 1);
        for (i, &y) in lanes.iter().enumerate() {
            let (a, b) = if i % 2 == 0 {
                (bounds.min_x, bounds.max_x)
            } else {
                (bounds.max_x, bounds.min_x)
            };
            waypoints.push(Vector2::new(a, y));
            waypoints.push(Vector2::new(b, y));
        }
        waypoints.push(waypoints[0]);

        let mut cumulative = vec![0.0];
        for w in waypoints.windows(2) {
            let last = *cumulative.last().expect("nonempty");
            cumulative.push(last + (w[1] - w[0]).norm());
        }
        Self {
            waypoints,
            cumulative,
        }
    }

    pub fn start(&self) -> Vector2<f64> {
        self.waypoints[0]
    }

    /// Length of one sweep-and-return loop.
    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("nonempty")
    }

    pub fn lane_count(&self) -> usize {
        (self.waypoints.len() - 1) / 2
    }

    pub fn waypoints(&self) -> &[Vector2<f64>] {
        &self.waypoints
    }

    /// Point at arc length `s`, wrapping around the loop.
    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        let total = self.length();
        let s = s.rem_euclid(total);
        let seg = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.waypoints[i.min(self.waypoints.len() - 1)],
            Err(i) => i - 1,
        };
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        a + (b - a) * ((s - self.cumulative[seg]) / len)
    }

    /// Steps needed for `sweeps` loops at `speed` m per step.
    pub fn steps_for(&self, sweeps: usize, speed: f64) -> usize {
        (sweeps as f64 * self.length() / speed).ceil() as usize
    }
}

fn step_toward(from: Vector2<f64>, to: Vector2<f64>, speed: f64) -> Vector2<f64> {
    let d = to - from;
    let n = d.norm();
    if n <= speed {
        to
    } else {
        from + d * (speed / n)
    }
}

/// Waypoint-following planner. Holds the precomputed sweep so the
/// per-step call is cheap.
#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    path: LawnmowerPath,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        let path = LawnmowerPath::new(&cfg.bounds, cfg.lane_spacing);
        Self { cfg, path }
    }

    pub fn path(&self) -> &LawnmowerPath {
        &self.path
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn next_position(
        &self,
        robot: &RobotState,
        intensity: &Intensity,
        step: u64,
    ) -> Vector2<f64> {
        let goal = match self.cfg.strategy {
            Strategy::Lawnmower => None,
            Strategy::NearestGaussian => intensity.iter().map(|c| c.position()).min_by(|a, b| {
                (a - robot.position)
                    .norm()
                    .total_cmp(&(b - robot.position).norm())
            }),
            Strategy::LargestGaussian => {
                let spread = |c: &crate::gaussian::GaussianComponent| match self.cfg.spread {
                    SpreadMeasure::Trace => c.trace(),
                    SpreadMeasure::Determinant => c.determinant(),
                };
                // First maximum wins ties.
                intensity
                    .iter()
                    .fold(None, |best: Option<(f64, Vector2<f64>)>, c| {
                        let s = spread(c);
                        match best {
                            Some((bs, _)) if bs >= s => best,
                            _ => Some((s, c.position())),
                        }
                    })
                    .map(|(_, p)| p)
            }
        };
        let goal = goal.unwrap_or_else(|| self.path.point_at((step + 1) as f64 * robot.speed));
        let next = step_toward(robot.position, self.cfg.bounds.clamp(goal), robot.speed);
        self.cfg.bounds.clamp(next)
    }
}

/// Free-function form of [`Planner::next_position`].
pub fn next_position(
    robot: &RobotState,
    intensity: &Intensity,
    cfg: &PlannerConfig,
    step: u64,
) -> Vector2<f64> {
    Planner::new(cfg.clone()).next_position(robot, intensity, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianComponent;

    fn comp(m: [f64; 2], var: f64) -> GaussianComponent {
        GaussianComponent::new_2d(1.0, m, [[var, 0.0], [0.0, var]]).unwrap()
    }

    #[test]
    fn default_sweep_fits_three_times_in_budget() {
        let path = LawnmowerPath::new(&WorldBounds::default(), 30.0);
        assert_eq!(path.lane_count(), 6);
        assert!((path.length() - 1200.0).abs() < 1e-9);
        assert_eq!(path.steps_for(1, 0.5), 2400);
        assert!(path.steps_for(3, 0.5) <= 7278);
    }

    #[test]
    fn wide_lanes_also_fit() {
        let path = LawnmowerPath::new(&WorldBounds::default(), 50.0);
        assert_eq!(path.lane_count(), 4);
        assert!(path.steps_for(3, 0.5) <= 7278);
    }

    #[test]
    fn point_at_wraps() {
        let path = LawnmowerPath::new(&WorldBounds::default(), 30.0);
        assert_eq!(path.point_at(0.0), Vector2::new(0.0, 0.0));
        assert_eq!(path.point_at(75.0), Vector2::new(75.0, 0.0));
        assert_eq!(path.point_at(165.0), Vector2::new(150.0, 15.0));
        assert_eq!(path.point_at(1200.0 + 75.0), Vector2::new(75.0, 0.0));
    }

    #[test]
    fn nearest_gaussian_at_mean_stays() {
        let cfg = PlannerConfig {
            strategy: Strategy::NearestGaussian,
            ..PlannerConfig::default()
        };
        let robot = RobotState {
            position: Vector2::new(40.0, 40.0),
            speed: 0.5,
        };
        let v = Intensity::new(vec![comp([40.0, 40.0], 1.0), comp([10.0, 10.0], 1.0)]);
        assert_eq!(next_position(&robot, &v, &cfg, 0), Vector2::new(40.0, 40.0));
    }

    #[test]
    fn largest_gaussian_heads_to_widest() {
        let cfg = PlannerConfig {
            strategy: Strategy::LargestGaussian,
            ..PlannerConfig::default()
        };
        let robot = RobotState {
            position: Vector2::new(50.0, 50.0),
            speed: 0.5,
        };
        let v = Intensity::new(vec![comp([60.0, 50.0], 2.0), comp([50.0, 40.0], 4.5)]);
        let next = next_position(&robot, &v, &cfg, 0);
        assert!((next - Vector2::new(50.0, 49.5)).norm() < 1e-12);
    }

    #[test]
    fn empty_intensity_falls_back_to_sweep() {
        let cfg = PlannerConfig {
            strategy: Strategy::LargestGaussian,
            ..PlannerConfig::default()
        };
        let robot = RobotState {
            position: Vector2::new(0.0, 0.0),
            speed: 0.5,
        };
        assert_eq!(
            next_position(&robot, &Intensity::empty(), &cfg, 0),
            Vector2::new(0.5, 0.0)
        );
    }

    #[test]
    fn goal_outside_world_is_clamped() {
        let cfg = PlannerConfig {
            strategy: Strategy::NearestGaussian,
            ..PlannerConfig::default()
        };
        let robot = RobotState {
            position: Vector2::new(0.2, 75.0),
            speed: 0.5,
        };
        let v = Intensity::new(vec![comp([-30.0, 75.0], 1.0)]);
        assert_eq!(next_position(&robot, &v, &cfg, 0), Vector2::new(0.0, 75.0));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            "largest-gaussian".parse::<Strategy>().unwrap(),
            Strategy::LargestGaussian
        );
        assert_eq!(
            "lawnmower".parse::<Strategy>().unwrap(),
            Strategy::Lawnmower
        );
        assert!("spiral".parse::<Strategy>().is_err());
    }
}
