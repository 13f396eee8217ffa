//! Per-step metrics and their run-level summaries.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::gaussian::{GaussianComponent, Intensity};
use crate::track::{confirmed_tracks, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub n_components: usize,
    pub n_confirmed: usize,
    pub sum_w_components: f64,
    /// Sum of the latest weights of the confirmed tracks.
    pub sum_w_tracks: f64,
    /// Mean over true targets of the Mahalanobis distance to the closest
    /// confirmed track. Absent without confirmed tracks.
    pub mahal_closest: Option<f64>,
    /// Same for the second-closest track. Absent with fewer than two.
    pub mahal_second: Option<f64>,
    /// Largest covariance trace among confirmed tracks.
    pub worst_trace: Option<f64>,
}

/// Mahalanobis distance (not squared) of `x` under a track's latest
/// covariance.
fn track_distance(track: &Track, x: &Vector2<f64>) -> Option<f64> {
    let p = track.latest();
    let pos = nalgebra::DVector::from_column_slice(&[p.mean[0], p.mean[1]]);
    let cov = p.cov.view((0, 0), (2, 2)).into_owned();
    let c = GaussianComponent::new(1.0, pos, cov).ok()?;
    Some(
        c.mahalanobis_sq_unchecked(&nalgebra::DVector::from_column_slice(x.as_slice()))
            .sqrt(),
    )
}

/// Closest and second-closest distances from `x` to the given tracks.
pub fn closest_two(tracks: &[&Track], x: &Vector2<f64>) -> (Option<f64>, Option<f64>) {
    let mut first: Option<f64> = None;
    let mut second: Option<f64> = None;
    for t in tracks {
        let Some(d) = track_distance(t, x) else {
            continue;
        };
        match first {
            Some(f) if d >= f => {
                if second.is_none_or(|s| d < s) {
                    second = Some(d);
                }
            }
            _ => {
                second = first;
                first = Some(d);
            }
        }
    }
    (first, second)
}

pub fn compute_metrics(
    step: u64,
    truth: &[Vector2<f64>],
    tracks: &[Track],
    intensity: &Intensity,
) -> MetricsRecord {
    let confirmed = confirmed_tracks(tracks);
    let mut closest = Vec::with_capacity(truth.len());
    let mut second = Vec::with_capacity(truth.len());
    for x in truth {
        let (a, b) = closest_two(&confirmed, x);
        closest.extend(a);
        second.extend(b);
    }
    let mean_of = |v: &[f64]| {
        if v.is_empty() || v.len() < truth.len() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    MetricsRecord {
        step,
        n_components: intensity.len(),
        n_confirmed: confirmed.len(),
        sum_w_components: intensity.total_weight(),
        sum_w_tracks: confirmed.iter().map(|t| t.latest().weight).sum(),
        mahal_closest: mean_of(&closest),
        mahal_second: mean_of(&second),
        worst_trace: confirmed
            .iter()
            .map(|t| t.latest().cov.view((0, 0), (2, 2)).trace())
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            }),
    }
}

/// Mean and population standard deviation of the values present.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            count: v.len(),
        }
    }
}

impl Stat {
    /// Mean and sample (n - 1) standard deviation; zero spread for a
    /// single value.
    pub fn sample<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let pop = Self::of(values);
        if pop.count < 2 {
            return Self {
                std: if pop.count == 1 { 0.0 } else { f64::NAN },
                ..pop
            };
        }
        let n = pop.count as f64;
        Self {
            std: pop.std * (n / (n - 1.0)).sqrt(),
            ..pop
        }
    }
}

/// Time statistics of one run's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_components: Stat,
    pub n_confirmed: Stat,
    pub sum_w_components: Stat,
    pub sum_w_tracks: Stat,
    pub mahal_closest: Stat,
    pub mahal_second: Stat,
    pub worst_trace: Stat,
}

impl RunSummary {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        Self {
            n_components: Stat::of(records.iter().map(|r| r.n_components as f64)),
            n_confirmed: Stat::of(records.iter().map(|r| r.n_confirmed as f64)),
            sum_w_components: Stat::of(records.iter().map(|r| r.sum_w_components)),
            sum_w_tracks: Stat::of(records.iter().map(|r| r.sum_w_tracks)),
            mahal_closest: Stat::of(records.iter().filter_map(|r| r.mahal_closest)),
            mahal_second: Stat::of(records.iter().filter_map(|r| r.mahal_second)),
            worst_trace: Stat::of(records.iter().filter_map(|r| r.worst_trace)),
        }
    }

    /// Summary over the final `1/parts` of the run.
    pub fn tail(records: &[MetricsRecord], parts: usize) -> Self {
        let start = records.len() - records.len() / parts.max(1);
        Self::from_records(&records[start..])
    }
}
