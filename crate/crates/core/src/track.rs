//! Persistent, ID'd tracks built from per-step target estimates.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianComponent;
use crate::phd::TargetEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackPoint {
    pub step: u64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub weight: f64,
    /// Component index the estimate was extracted from, in that step's
    /// posterior intensity.
    pub source: usize,
}

impl TrackPoint {
    fn from_target(step: u64, t: &TargetEstimate) -> Self {
        Self {
            step,
            mean: t.mean.clone(),
            cov: t.cov.clone(),
            weight: t.weight,
            source: t.source,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    history: Vec<TrackPoint>,
    status: TrackStatus,
    coast: u32,
}

impl Track {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn history(&self) -> &[TrackPoint] {
        &self.history
    }

    pub fn latest(&self) -> &TrackPoint {
        self.history.last().expect("tracks are never empty")
    }

    /// Life length `l`.
    pub fn life_length(&self) -> usize {
        self.history.len()
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    /// Consecutive steps without an associated target.
    pub fn coast(&self) -> u32 {
        self.coast
    }

    /// Whether the track was extended at `step`.
    pub fn updated_at(&self, step: u64) -> bool {
        self.latest().step == step
    }

    fn refresh(&mut self, l_threshold: usize) {
        self.status = if self.history.len() >= l_threshold {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
    }

    fn gate_distance(&self, target: &TargetEstimate) -> Option<f64> {
        let p = self.latest();
        let c = GaussianComponent::new(1.0, p.mean.clone(), p.cov.clone()).ok()?;
        if c.dim() != target.mean.len() {
            return None;
        }
        Some(c.mahalanobis_sq_unchecked(&target.mean))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub l_threshold: usize,
    /// Squared Mahalanobis gate, normally the merge threshold.
    pub gate: f64,
    pub max_coast: u32,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            l_threshold: 3,
            gate: 10.0,
            max_coast: 10,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_threshold < 1 {
            return Err(Error::config("tracks.l_threshold", "must be at least 1"));
        }
        if !(self.gate > 0.0) {
            return Err(Error::config("tracks.gate", "must be positive"));
        }
        Ok(())
    }
}

/// Live track set plus the id counter, so ids are never reused in a run.
#[derive(Debug, Clone)]
pub struct TrackManager {
    cfg: TrackConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl TrackManager {
    pub fn new(cfg: TrackConfig) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &TrackConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    fn spawn(&mut self, step: u64, target: &TargetEstimate) -> Track {
        let mut t = Track {
            id: self.next_id,
            history: vec![TrackPoint::from_target(step, target)],
            status: TrackStatus::Tentative,
            coast: 0,
        };
        t.refresh(self.cfg.l_threshold);
        self.next_id += 1;
        t
    }

    /// Associates this step's targets with the live tracks.
    ///
    /// Targets are visited by descending weight. Each goes to the gated
    /// track with the smallest squared Mahalanobis distance (ties to the
    /// lower id). Of the targets sharing a track the nearest extends it and
    /// the others start new tracks, as do targets that gate nowhere.
    /// Tracks left without a target coast, and retire once they have
    /// coasted more than `max_coast` steps.
    pub fn associate(&mut self, targets: &[TargetEstimate], step: u64) {
        if let Some(last) = self.tracks.iter().map(|t| t.latest().step).max() {
            debug_assert!(step > last, "steps must increase");
        }
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.sort_by(|&a, &b| targets[b].weight.total_cmp(&targets[a].weight));

        let existing = self.tracks.len();
        let mut claims: Vec<Option<(usize, f64)>> = vec![None; existing];
        let mut assigned: Vec<Option<usize>> = vec![None; targets.len()];

        for &ti in &order {
            let target = &targets[ti];
            let mut best: Option<(usize, f64)> = None;
            for (k, track) in self.tracks.iter().enumerate() {
                let Some(d) = track.gate_distance(target) else {
                    continue;
                };
                if d > self.cfg.gate {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bk, bd)) => d < bd || (d == bd && track.id < self.tracks[bk].id),
                };
                if better {
                    best = Some((k, d));
                }
            }
            if let Some((k, d)) = best {
                assigned[ti] = Some(k);
                if claims[k].is_none_or(|(_, cd)| d < cd) {
                    claims[k] = Some((ti, d));
                }
            }
        }

        let mut born = Vec::new();
        for &ti in &order {
            let target = &targets[ti];
            match assigned[ti] {
                Some(k) if claims[k].map(|(c, _)| c) == Some(ti) => {
                    let track = &mut self.tracks[k];
                    track.history.push(TrackPoint::from_target(step, target));
                    track.coast = 0;
                }
                _ => {
                    let t = self.spawn(step, target);
                    born.push(t);
                }
            }
        }
        let extended: Vec<bool> = claims.iter().map(|c| c.is_some()).collect();

        for (track, &ext) in self.tracks.iter_mut().zip(&extended) {
            if !ext {
                track.coast += 1;
            }
        }
        let max_coast = self.cfg.max_coast;
        self.tracks.retain(|t| t.coast <= max_coast);
        self.tracks.extend(born);
        let l = self.cfg.l_threshold;
        for t in &mut self.tracks {
            t.refresh(l);
        }
    }

    pub fn confirmed(&self) -> Vec<&Track> {
        confirmed_tracks(&self.tracks)
    }
}

/// Confirmed subset, ordered by id.
pub fn confirmed_tracks(tracks: &[Track]) -> Vec<&Track> {
    let mut out: Vec<&Track> = tracks.iter().filter(|t| t.is_confirmed()).collect();
    out.sort_by_key(|t| t.id);
    out
}
