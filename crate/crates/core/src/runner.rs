//! Experiment execution and on-disk artefacts.
//!
//! Layout of an output directory:
//!
//! ```text
//! <out>/manifest.json
//! <out>/summary.json
//! <out>/seed-<n>/metrics.csv   step,n_components,n_confirmed,sum_w_components,sum_w_tracks,mahal_closest,mahal_second
//! <out>/seed-<n>/tracks.csv    step,track_id,x,y,p_xx,p_xy,p_yy,status
//! <out>/seed-<n>/events.csv    step,kind,id,x,y   (kind: robot | measurement | truth)
//! ```
//!
//! Floats are written with 17 significant digits so every file parses back
//! to the same bits. Absent distances are empty fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::gp::GpHyperparams;
use crate::planner::Strategy;
use crate::sim::metrics::{MetricsRecord, RunSummary, Stat};
use crate::sim::scenario::{
    fit_motion_hyperparams, ScenarioOutput, Simulation, StepEvent, TrackLogRow,
};
use crate::track::TrackStatus;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GMPHD_SAT_OUT";

pub const METRICS_HEADER: [&str; 7] = [
    "step",
    "n_components",
    "n_confirmed",
    "sum_w_components",
    "sum_w_tracks",
    "mahal_closest",
    "mahal_second",
];
pub const TRACKS_HEADER: [&str; 8] = [
    "step", "track_id", "x", "y", "p_xx", "p_xy", "p_yy", "status",
];
pub const EVENTS_HEADER: [&str; 5] = ["step", "kind", "id", "x", "y"];

/// `$GMPHD_SAT_OUT`, or `runs` in the working directory.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.n_components.to_string(),
            r.n_confirmed.to_string(),
            fmt_f64(r.sum_w_components),
            fmt_f64(r.sum_w_tracks),
            fmt_opt(r.mahal_closest),
            fmt_opt(r.mahal_second),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T> {
    row.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "{}: bad field {i} in row {:?}",
            path.display(),
            row
        ))
    })
}

fn parse_opt(path: &Path, row: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    match row.get(i) {
        Some("") => Ok(None),
        _ => parse_field(path, row, i).map(Some),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            expected,
            header
        )));
    }
    Ok(())
}

/// Reads a metrics file. `worst_trace` is not stored there and comes back
/// as `None`; see [`read_worst_traces`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, &mut r, &METRICS_HEADER)?;
    r.records()
        .map(|row| {
            let row = row?;
            Ok(MetricsRecord {
                step: parse_field(path, &row, 0)?,
                n_components: parse_field(path, &row, 1)?,
                n_confirmed: parse_field(path, &row, 2)?,
                sum_w_components: parse_field(path, &row, 3)?,
                sum_w_tracks: parse_field(path, &row, 4)?,
                mahal_closest: parse_opt(path, &row, 5)?,
                mahal_second: parse_opt(path, &row, 6)?,
                worst_trace: None,
            })
        })
        .collect()
}

pub fn write_tracks_csv(path: &Path, rows: &[TrackLogRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACKS_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.track_id.to_string(),
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(r.p_xx),
            fmt_f64(r.p_xy),
            fmt_f64(r.p_yy),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tracks_csv(path: &Path) -> Result<Vec<TrackLogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, &mut r, &TRACKS_HEADER)?;
    r.records()
        .map(|row| {
            let row = row?;
            let status = match row.get(7) {
                Some("confirmed") => TrackStatus::Confirmed,
                Some("tentative") => TrackStatus::Tentative,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: unknown track status {other:?}",
                        path.display()
                    )))
                }
            };
            Ok(TrackLogRow {
                step: parse_field(path, &row, 0)?,
                track_id: parse_field(path, &row, 1)?,
                x: parse_field(path, &row, 2)?,
                y: parse_field(path, &row, 3)?,
                p_xx: parse_field(path, &row, 4)?,
                p_xy: parse_field(path, &row, 5)?,
                p_yy: parse_field(path, &row, 6)?,
                status,
            })
        })
        .collect()
}

/// Largest confirmed-track covariance trace per step, from a track log.
/// Steps without confirmed tracks map to `None`.
pub fn worst_traces(rows: &[TrackLogRow], steps: &[u64]) -> Vec<Option<f64>> {
    let mut by_step = std::collections::HashMap::<u64, f64>::new();
    for r in rows.iter().filter(|r| r.status == TrackStatus::Confirmed) {
        let tr = r.p_xx + r.p_yy;
        by_step
            .entry(r.step)
            .and_modify(|v| *v = v.max(tr))
            .or_insert(tr);
    }
    steps.iter().map(|s| by_step.get(s).copied()).collect()
}

/// Metrics file with `worst_trace` restored from the sibling track log.
pub fn read_worst_traces(seed_dir: &Path) -> Result<Vec<MetricsRecord>> {
    let mut records = read_metrics_csv(&seed_dir.join("metrics.csv"))?;
    let tracks = read_tracks_csv(&seed_dir.join("tracks.csv"))?;
    let steps: Vec<u64> = records.iter().map(|r| r.step).collect();
    for (r, t) in records.iter_mut().zip(worst_traces(&tracks, &steps)) {
        r.worst_trace = t;
    }
    Ok(records)
}

pub fn write_events_csv(path: &Path, events: &[StepEvent]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        let step = e.step.to_string();
        w.write_record([
            step.as_str(),
            "robot",
            "0",
            &fmt_f64(e.robot.x),
            &fmt_f64(e.robot.y),
        ])?;
        for (i, z) in e.measurements.iter().enumerate() {
            w.write_record([
                step.as_str(),
                "measurement",
                &i.to_string(),
                &fmt_f64(z.x),
                &fmt_f64(z.y),
            ])?;
        }
        for (i, x) in e.truth.iter().enumerate() {
            w.write_record([
                step.as_str(),
                "truth",
                &i.to_string(),
                &fmt_f64(x.x),
                &fmt_f64(x.y),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub code_version: String,
}

impl RunManifest {
    pub fn new(
        config: ScenarioConfig,
        seeds: Vec<u64>,
        output_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::InvalidArgument("seed list is empty".into()));
        }
        config.validate()?;
        Ok(Self {
            scenario: config.name.clone(),
            config,
            seeds,
            output_dir: output_dir.into(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// `count` consecutive seeds starting at the config's seed.
    pub fn consecutive(
        config: ScenarioConfig,
        count: usize,
        output_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let start = config.seed;
        Self::new(config, (start..start + count as u64).collect(), output_dir)
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join(format!("seed-{seed:04}"))
    }

    pub fn config_for(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            ..self.config.clone()
        }
    }
}

/// Time averages of one seed over the whole run, its last third, and the
/// worst confirmed trace over its final half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub full: RunSummary,
    pub last_third: RunSummary,
    pub final_half_worst_trace: Stat,
}

impl SeedSummary {
    pub fn from_records(seed: u64, records: &[MetricsRecord]) -> Self {
        Self {
            seed,
            full: RunSummary::from_records(records),
            last_third: RunSummary::tail(records, 3),
            final_half_worst_trace: RunSummary::tail(records, 2).worst_trace,
        }
    }
}

/// Across-seed mean and sample STD of per-seed time averages, in the
/// column order of the published tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumns {
    pub tracks: Stat,
    pub sum_w_tracks: Stat,
    pub components: Stat,
    pub sum_w_components: Stat,
    pub mahal_closest: Stat,
    pub mahal_second: Stat,
}

impl TableColumns {
    fn of<'a>(runs: impl Iterator<Item = &'a RunSummary> + Clone) -> Self {
        let col = |f: fn(&RunSummary) -> &Stat| {
            Stat::sample(runs.clone().map(f).filter(|s| s.count > 0).map(|s| s.mean))
        };
        Self {
            tracks: col(|r| &r.n_confirmed),
            sum_w_tracks: col(|r| &r.sum_w_tracks),
            components: col(|r| &r.n_components),
            sum_w_components: col(|r| &r.sum_w_components),
            mahal_closest: col(|r| &r.mahal_closest),
            mahal_second: col(|r| &r.mahal_second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub full: TableColumns,
    pub last_third: TableColumns,
    pub final_half_worst_trace: Stat,
}

impl TableSummary {
    pub fn from_seeds(seeds: &[SeedSummary]) -> Self {
        Self {
            full: TableColumns::of(seeds.iter().map(|s| &s.full)),
            last_third: TableColumns::of(seeds.iter().map(|s| &s.last_third)),
            final_half_worst_trace: Stat::sample(
                seeds
                    .iter()
                    .filter(|s| s.final_half_worst_trace.count > 0)
                    .map(|s| s.final_half_worst_trace.mean),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub table: TableSummary,
    pub per_seed: Vec<SeedSummary>,
    pub failures: Vec<SeedFailure>,
}

impl BatchSummary {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Writes one seed's CSV files into `dir`.
pub fn write_seed_artifacts(dir: &Path, out: &ScenarioOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_metrics_csv(&dir.join("metrics.csv"), &out.metrics)?;
    write_tracks_csv(&dir.join("tracks.csv"), &out.track_log)?;
    write_events_csv(&dir.join("events.csv"), &out.events)
}

/// Shared GP hyperparameters for a batch. Every seed trains on the same
/// trajectory, so one fit serves all of them.
fn batch_hyperparams(cfg: &ScenarioConfig) -> Result<Option<Vec<GpHyperparams>>> {
    if cfg.gp_enabled() {
        fit_motion_hyperparams(cfg).map(Some)
    } else {
        Ok(None)
    }
}

fn run_seed(
    manifest: &RunManifest,
    seed: u64,
    hyper: &Option<Vec<GpHyperparams>>,
) -> Result<SeedSummary> {
    let cfg = manifest.config_for(seed);
    let out = Simulation::with_gp_hyperparams(cfg, hyper.clone())?.run()?;
    write_seed_artifacts(&manifest.seed_dir(seed), &out)?;
    Ok(SeedSummary::from_records(seed, &out.metrics))
}

/// Runs every seed of the manifest in parallel, writing per-seed files,
/// `manifest.json` and `summary.json`. A failing seed is recorded in the
/// summary and does not stop the others; only errors that prevent the
/// batch from starting or its summary from being written are returned.
pub fn run_batch(manifest: &RunManifest) -> Result<BatchSummary> {
    let dir = &manifest.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("manifest.json"), manifest)?;

    let results: Vec<(u64, Result<SeedSummary>)> = match batch_hyperparams(&manifest.config) {
        Ok(hyper) => manifest
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(manifest, seed, &hyper)))
            .collect(),
        Err(e) => {
            let msg = e.to_string();
            manifest
                .seeds
                .iter()
                .map(|&seed| (seed, Err(Error::GpFit(msg.clone()))))
                .collect()
        }
    };

    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(s) => per_seed.push(s),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = BatchSummary {
        scenario: manifest.scenario.clone(),
        seeds: manifest.seeds.clone(),
        table: TableSummary::from_seeds(&per_seed),
        per_seed,
        failures,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Which paired experiment `compare` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// Same seeds with and without the no-detection push.
    Push,
    /// Same seeds under every planning strategy.
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonArm {
    pub label: String,
    pub summary: BatchSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub arms: Vec<ComparisonArm>,
}

impl ComparisonReport {
    pub fn succeeded(&self) -> bool {
        self.arms.iter().all(|a| a.summary.succeeded())
    }

    pub fn arm(&self, label: &str) -> Option<&BatchSummary> {
        self.arms
            .iter()
            .find(|a| a.label == label)
            .map(|a| &a.summary)
    }
}

/// Runs each arm of a comparison into `<out>/<label>` and writes
/// `<out>/compare.json`.
pub fn run_comparison(
    kind: Comparison,
    base: &ScenarioConfig,
    seeds: &[u64],
    out: &Path,
) -> Result<ComparisonReport> {
    let arms: Vec<(String, ScenarioConfig)> = match kind {
        Comparison::Push => [("push", true), ("no_push", false)]
            .into_iter()
            .map(|(label, on)| {
                let mut c = base.clone();
                c.filter.push_enabled = on;
                c.name = format!("{}-{label}", base.name);
                (label.to_string(), c)
            })
            .collect(),
        Comparison::Planner => [
            Strategy::Lawnmower,
            Strategy::NearestGaussian,
            Strategy::LargestGaussian,
        ]
        .into_iter()
        .map(|s| {
            let mut c = base.clone();
            c.planner.strategy = s;
            c.name = format!("{}-{}", base.name, s.as_str());
            (s.as_str().to_string(), c)
        })
        .collect(),
    };
    let mut report = ComparisonReport { arms: Vec::new() };
    for (label, cfg) in arms {
        let manifest = RunManifest::new(cfg, seeds.to_vec(), out.join(&label))?;
        let summary = run_batch(&manifest)?;
        report.arms.push(ComparisonArm { label, summary });
    }
    write_json(&out.join("compare.json"), &report)?;
    Ok(report)
}

/// Rebuilds a table from run directories: each directory is either one
/// seed's folder or a batch folder containing `seed-*` folders.
pub fn table_from_dirs(dirs: &[PathBuf]) -> Result<TableSummary> {
    let mut seed_dirs = Vec::new();
    for d in dirs {
        if d.join("metrics.csv").is_file() {
            seed_dirs.push(d.clone());
            continue;
        }
        let mut found: Vec<PathBuf> = fs::read_dir(d)
            .map_err(|e| Error::io(d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("metrics.csv").is_file())
            .collect();
        if found.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{}: no metrics.csv found",
                d.display()
            )));
        }
        found.sort();
        seed_dirs.extend(found);
    }
    let seeds = seed_dirs
        .iter()
        .enumerate()
        .map(|(i, d)| read_worst_traces(d).map(|r| SeedSummary::from_records(i as u64, &r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TableSummary::from_seeds(&seeds))
}

/// Writes a table as pretty JSON.
pub fn write_table(path: &Path, table: &TableSummary) -> Result<()> {
    write_json(path, table)
}
