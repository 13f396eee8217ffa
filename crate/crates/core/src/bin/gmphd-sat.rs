use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gmphd_sat::config::{load_config, InitialEstimate, ScenarioConfig};
use gmphd_sat::planner::Strategy;
use gmphd_sat::runner::{self, Comparison, RunManifest, OUT_ENV};

#[derive(Parser)]
#[command(
    name = "gmphd-sat",
    version,
    about = "GM-PHD search and tracking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with a single seed.
    Run(Scenario),
    /// Run a scenario over consecutive seeds.
    Batch {
        #[command(flatten)]
        scenario: Scenario,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Paired runs: push ablation or planner comparison.
    Compare {
        #[arg(long, value_enum)]
        kind: CompareKind,
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Aggregate finished runs into a table-shaped JSON.
    Table {
        /// Batch directories or single-seed directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Output file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareKind {
    Push,
    Planner,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateArg {
    Under,
    Exact,
    Over,
}

#[derive(Args)]
struct Scenario {
    /// TOML scenario file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// lawnmower, nearest_gaussian or largest_gaussian.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Clutter rate per scan.
    #[arg(long)]
    clutter: Option<f64>,
    #[arg(long, value_enum)]
    estimate: Option<EstimateArg>,
    #[arg(long)]
    no_push: bool,
    #[arg(long)]
    moving_targets: bool,
    #[arg(long)]
    steps: Option<u64>,
}

impl Scenario {
    fn resolve(&self) -> gmphd_sat::Result<(ScenarioConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.strategy {
            cfg.planner.strategy = s;
        }
        if let Some(c) = self.clutter {
            cfg.clutter_rate = c;
        }
        if let Some(e) = self.estimate {
            cfg.estimate = match e {
                EstimateArg::Under => InitialEstimate::Under,
                EstimateArg::Exact => InitialEstimate::Exact,
                EstimateArg::Over => InitialEstimate::Over,
            };
        }
        if self.no_push {
            cfg.filter.push_enabled = false;
        }
        if self.moving_targets {
            cfg.stationary = false;
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        cfg.validate()?;
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| runner::default_output_root().join(&cfg.name));
        Ok((cfg, out))
    }
}

fn exit_for(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn execute(cli: Cli) -> gmphd_sat::Result<ExitCode> {
    match cli.command {
        Command::Run(s) => {
            let (cfg, out) = s.resolve()?;
            let manifest = RunManifest::consecutive(cfg, 1, &out)?;
            let summary = runner::run_batch(&manifest)?;
            println!("{}", out.display());
            Ok(exit_for(summary.succeeded()))
        }
        Command::Batch { scenario, seeds } => {
            let (cfg, out) = scenario.resolve()?;
            let manifest = RunManifest::consecutive(cfg, seeds, &out)?;
            let summary = runner::run_batch(&manifest)?;
            println!("{}", out.display());
            Ok(exit_for(summary.succeeded()))
        }
        Command::Compare {
            kind,
            scenario,
            seeds,
        } => {
            let (cfg, out) = scenario.resolve()?;
            let kind = match kind {
                CompareKind::Push => Comparison::Push,
                CompareKind::Planner => Comparison::Planner,
            };
            let seed_list: Vec<u64> = (cfg.seed..cfg.seed + seeds as u64).collect();
            let report = runner::run_comparison(kind, &cfg, &seed_list, &out)?;
            println!("{}", out.display());
            Ok(exit_for(report.succeeded()))
        }
        Command::Table { dirs, out } => {
            let table = runner::table_from_dirs(&dirs)?;
            match out {
                Some(p) => runner::write_table(&p, &table)?,
                None => println!("{}", serde_json::to_string_pretty(&table)?),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
