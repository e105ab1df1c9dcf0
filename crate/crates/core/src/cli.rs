//! `minimon run | report | sweep | plot`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::{
    find_result_dirs, read_json, run_in_process, write_json, BenchError, BenchmarkConfig, Launcher,
    StoredResult, CONFIG_FILE,
};
use crate::report::{
    render_comparisons, render_depth_chart, render_table, write_summary_csv, DepthPoint,
    DepthSeries, Labelled, ReportError,
};
use crate::stats::{summarize_nanos, StatsError, Summary};
use crate::suite::{default_suite, SuiteConfigFile, SuiteError, SUITE_RECORD};

pub const OUT_ENV: &str = "MINIMON_OUT";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Parser)]
#[command(name = "minimon", version, about = "Monitoring overhead benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configuration of a suite at its own depth.
    Run(RunArgs),
    /// Summarize results: tables, pairwise comparisons, summary CSV.
    Report(InArgs),
    /// Run every configuration at every listed depth.
    Sweep(SweepArgs),
    /// Draw mean overhead against depth as SVG.
    Plot(PlotArgs),
    /// Execute one run in this process (used by the launcher).
    #[command(hide = true)]
    Child(ChildArgs),
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Suite file; the bundled eight-configuration suite if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; falls back to the suite's output_dir.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Use 2 000 000 iterations and 10 runs per configuration.
    #[arg(long = "paper-scale")]
    pub full_scale: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Comma-separated depths; the suite's depths if omitted.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
pub struct InArgs {
    #[arg(long = "in", env = OUT_ENV)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in", env = OUT_ENV)]
    pub input: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChildArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub run: u32,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{context}: {source}")]
    Stats { context: String, source: StatsError },
    #[error("no output directory: pass --out, set {OUT_ENV}, or set output_dir in the suite")]
    NoOutputDir,
    #[error("no depths: pass --depths or set depths in the suite")]
    NoDepths,
    #[error("depths must each be at least 1")]
    ZeroDepth,
    #[error("no results under {0}")]
    NoResults(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed runs: {}", .0.join(", "))]
    RunsFailed(Vec<String>),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args.suite, None),
        Command::Sweep(args) => cmd_run(&args.suite, Some(args.depths)),
        Command::Report(args) => cmd_report(&args.input).map(|text| print!("{text}")),
        Command::Plot(args) => cmd_plot(&args.input, &args.out),
        Command::Child(args) => cmd_child(&args.dir, args.run),
    }
}

fn load_suite(args: &SuiteArgs) -> Result<(SuiteConfigFile, PathBuf), CliError> {
    let mut suite = match &args.config {
        Some(path) => SuiteConfigFile::load(path)?,
        None => default_suite(),
    };
    if args.full_scale {
        suite.full_scale();
    }
    let out = args
        .out
        .clone()
        .or_else(|| suite.output_dir.clone())
        .ok_or(CliError::NoOutputDir)?;
    Ok((suite, out))
}

/// `depths` is `None` for `run` and `Some(flag)` for `sweep`.
fn cmd_run(args: &SuiteArgs, depths: Option<Option<Vec<u32>>>) -> Result<(), CliError> {
    let (mut suite, out) = load_suite(args)?;
    let depths = match depths {
        None => None,
        Some(flag) => {
            let d = flag
                .or_else(|| suite.depths.clone())
                .ok_or(CliError::NoDepths)?;
            if d.is_empty() {
                return Err(CliError::NoDepths);
            }
            if d.contains(&0) {
                return Err(CliError::ZeroDepth);
            }
            suite.depths = Some(d.clone());
            Some(d)
        }
    };
    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    suite.output_dir = Some(out.clone());
    write_json(&out.join(SUITE_RECORD), &suite)?;

    let launcher = Launcher::current_exe().map_err(|source| CliError::Io {
        path: PathBuf::from("current executable"),
        source,
    })?;
    let grid: Vec<BenchmarkConfig> = match &depths {
        None => suite.configs.clone(),
        Some(ds) => suite
            .configs
            .iter()
            .flat_map(|c| ds.iter().map(move |&d| c.at_depth(d)))
            .collect(),
    };
    let mut failed = Vec::new();
    for config in &grid {
        eprintln!(
            "running {} (depth {}, {} x {} iterations)",
            config.config_id, config.workload.depth, config.runs, config.iterations
        );
        let result = launcher.run_config(config, &out)?;
        for run in result.failed_runs() {
            failed.push(format!(
                "{}@d{} run {run}",
                config.config_id, config.workload.depth
            ));
        }
        for outcome in &result.runs {
            if let crate::bench::RunStatus::Failed(why) = &outcome.status {
                eprintln!("  run {} failed: {why}", outcome.run);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::RunsFailed(failed))
    }
}

fn cmd_child(dir: &Path, run: u32) -> Result<(), CliError> {
    let config: BenchmarkConfig = read_json(&dir.join(CONFIG_FILE))?;
    run_in_process(&config, run, dir)?;
    Ok(())
}

/// Post-warmup summary of one stored result.
#[derive(Debug, Clone)]
pub struct ResultSummary {
    pub config_id: String,
    pub depth: u32,
    pub summary: Summary<f64>,
}

/// Summaries of everything under `input`, in suite order when a suite
/// record exists, then by config id, then by depth.
pub fn load_summaries(input: &Path) -> Result<Vec<ResultSummary>, CliError> {
    if !input.is_dir() {
        return Err(CliError::NoResults(input.to_owned()));
    }
    let suite: Option<SuiteConfigFile> = read_json(&input.join(SUITE_RECORD)).ok();
    let mut rows = Vec::new();
    for dir in find_result_dirs(input)? {
        let stored = StoredResult::load(&dir)?;
        let depth = stored.config.workload.depth;
        let summary = summarize_nanos::<f64>(&stored.post_warmup(), depth).map_err(|source| {
            CliError::Stats {
                context: dir.display().to_string(),
                source,
            }
        })?;
        rows.push(ResultSummary {
            config_id: stored.config.config_id,
            depth,
            summary,
        });
    }
    if rows.is_empty() {
        return Err(CliError::NoResults(input.to_owned()));
    }
    let rank = |id: &str| {
        suite
            .as_ref()
            .and_then(|s| s.position(id))
            .unwrap_or(usize::MAX)
    };
    rows.sort_by(|a, b| {
        (rank(&a.config_id), &a.config_id, a.depth).cmp(&(
            rank(&b.config_id),
            &b.config_id,
            b.depth,
        ))
    });
    Ok(rows)
}

/// Returns the printed report and writes `summary.csv` under `input`.
pub fn cmd_report(input: &Path) -> Result<String, CliError> {
    let rows = load_summaries(input)?;
    let depths: BTreeSet<u32> = rows.iter().map(|r| r.depth).collect();
    let multi = depths.len() > 1;
    let label = |r: &ResultSummary| {
        if multi {
            format!("{}@d{}", r.config_id, r.depth)
        } else {
            r.config_id.clone()
        }
    };

    let mut text = String::new();
    for &depth in &depths {
        let columns: Vec<Labelled<f64>> = rows
            .iter()
            .filter(|r| r.depth == depth)
            .map(|r| Labelled::new(r.config_id.clone(), r.summary))
            .collect();
        text.push_str(&format!("depth {depth} (µs per iteration)\n"));
        text.push_str(&render_table(&columns)?);
        let comparisons = render_comparisons(&columns);
        if !comparisons.is_empty() {
            text.push('\n');
            text.push_str(&comparisons);
        }
        text.push('\n');
    }
    let all: Vec<Labelled<f64>> = rows
        .iter()
        .map(|r| Labelled::new(label(r), r.summary))
        .collect();
    write_summary_csv(&input.join(SUMMARY_FILE), &all)?;
    Ok(text)
}

pub fn cmd_plot(input: &Path, out: &Path) -> Result<(), CliError> {
    let rows = load_summaries(input)?;
    let mut series: Vec<DepthSeries<f64>> = Vec::new();
    for r in &rows {
        let point = DepthPoint {
            depth: r.depth,
            mean: r.summary.mean,
            stddev: r.summary.stddev,
        };
        match series.iter_mut().find(|s| s.config_id == r.config_id) {
            Some(s) => s.points.push(point),
            None => series.push(DepthSeries::new(r.config_id.clone(), vec![point])),
        }
    }
    let svg = render_depth_chart(&series)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_owned(),
            source,
        })?;
    }
    fs::write(out, svg).map_err(|source| CliError::Io {
        path: out.to_owned(),
        source,
    })
}
