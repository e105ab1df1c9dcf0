//! Benchmark orchestration.
//!
//! Each run executes in a fresh child process so that no state from earlier
//! runs (allocator, caches, trace counters) leaks into later ones. Results
//! for one configuration at one depth live in `<out>/<config_id>/d<depth>/`:
//!
//! ```text
//! config.json     the configuration the children read
//! run-<k>.csv     config_id,run,iteration,duration_ns
//! run-<k>.json    RunMetadata
//! run-<k>.log     monitoring log (file writer only)
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{estimate_resolution_ns, now_ns};
use crate::pipeline::{
    MonitoringController, PipelineConfig, PipelineError, PipelineReport, WriterKind,
};
use crate::workload::{InstrumentedWorkload, WorkloadParams};

pub const DESK_ITERATIONS: u64 = 100_000;
pub const DESK_RUNS: u32 = 5;
pub const FULL_ITERATIONS: u64 = 2_000_000;
pub const FULL_RUNS: u32 = 10;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.5;

pub const CONFIG_FILE: &str = "config.json";
pub const CSV_HEADER: [&str; 4] = ["config_id", "run", "iteration", "duration_ns"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("no raw samples found in {0}")]
    NoSamples(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub config_id: String,
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub workload: WorkloadParams,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
}

fn default_iterations() -> u64 {
    DESK_ITERATIONS
}

fn default_runs() -> u32 {
    DESK_RUNS
}

fn default_warmup() -> f64 {
    DEFAULT_WARMUP_FRACTION
}

impl BenchmarkConfig {
    pub fn new(config_id: impl Into<String>, pipeline: PipelineConfig) -> Self {
        Self {
            config_id: config_id.into(),
            pipeline,
            workload: WorkloadParams::default(),
            iterations: DESK_ITERATIONS,
            runs: DESK_RUNS,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| {
            Err(BenchError::InvalidConfig(format!(
                "{}: {msg}",
                self.config_id
            )))
        };
        let id_ok = !self.config_id.is_empty()
            && self
                .config_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_+.".contains(c))
            && !self.config_id.starts_with('.');
        if !id_ok {
            return bad("config_id must be non-empty and use only [A-Za-z0-9-_+.]".into());
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!(
                "warmup_fraction must be in [0, 1), got {}",
                self.warmup_fraction
            ));
        }
        if self.workload.depth < 1 {
            return bad("workload.depth must be at least 1".into());
        }
        self.pipeline
            .validate()
            .map_err(|e| BenchError::InvalidConfig(format!("{}: {e}", self.config_id)))
    }

    pub fn at_depth(&self, depth: u32) -> Self {
        let mut c = self.clone();
        c.workload.depth = depth;
        c
    }
}

pub fn result_dir(out: &Path, config_id: &str, depth: u32) -> PathBuf {
    out.join(config_id).join(format!("d{depth}"))
}

fn run_file(dir: &Path, run: u32, ext: &str) -> PathBuf {
    dir.join(format!("run-{run}.{ext}"))
}

/// What a child records about its run besides the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: BenchmarkConfig,
    pub run: u32,
    pub pid: u32,
    pub iterations: u64,
    pub counters: PipelineReport,
    pub clock_resolution_ns: u64,
    /// Sum of the workload's return values; keeps the calls observable.
    pub checksum: u64,
}

/// Per-run overhead samples in nanoseconds, warmup included.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub runs: Vec<Vec<i64>>,
}

impl SampleSet {
    pub fn total(&self) -> usize {
        self.runs.iter().map(Vec::len).sum()
    }

    /// Post-warmup samples of all runs, concatenated in run order.
    pub fn pooled_after_warmup(&self, fraction: f64) -> Vec<i64> {
        self.runs
            .iter()
            .flat_map(|r| discard_warmup(r, fraction).iter().copied())
            .collect()
    }
}

/// Drops the first `floor(fraction * n)` samples.
pub fn discard_warmup<T>(samples: &[T], fraction: f64) -> &[T] {
    debug_assert!((0.0..1.0).contains(&fraction));
    let drop = ((samples.len() as f64) * fraction).floor() as usize;
    &samples[drop.min(samples.len())..]
}

/// Times `iterations` root calls of the instrumented workload. Returns the
/// samples (root-call duration minus busy time) and the checksum.
pub fn measure(
    app: &InstrumentedWorkload,
    params: WorkloadParams,
    iterations: u64,
) -> (Vec<i64>, u64) {
    let busy = params.busy_ns as i64;
    let mut samples = vec![0i64; iterations as usize];
    let mut checksum = 0u64;
    for sample in samples.iter_mut() {
        let start = now_ns();
        let ts = app.call(params);
        let end = now_ns();
        checksum = checksum.wrapping_add(ts);
        *sample = (end - start) as i64 - busy;
    }
    (std::hint::black_box(samples), checksum)
}

/// One run in the current process: start the pipeline, measure, shut down,
/// persist samples and metadata under `dir`.
pub fn run_in_process(
    config: &BenchmarkConfig,
    run: u32,
    dir: &Path,
) -> Result<RunMetadata, BenchError> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    // the epoch is fixed on first use; make sure workload timestamps are > 0
    now_ns();
    let clock_resolution_ns = estimate_resolution_ns(1000);

    let mut pipeline = config.pipeline.clone();
    if pipeline.writer == WriterKind::File {
        pipeline.output_path = Some(run_file(dir, run, "log"));
    }
    let controller = MonitoringController::start_new(pipeline)?;
    let app = InstrumentedWorkload::new(
        config.pipeline.probe,
        controller.clone(),
        config.pipeline.aggregation_window,
    );
    let (samples, checksum) = measure(&app, config.workload, config.iterations);
    app.finish();
    drop(app);
    let counters = controller.shutdown();

    write_samples_csv(&run_file(dir, run, "csv"), &config.config_id, run, &samples)?;
    let metadata = RunMetadata {
        config: config.clone(),
        run,
        pid: std::process::id(),
        iterations: config.iterations,
        counters,
        clock_resolution_ns,
        checksum,
    };
    write_json(&run_file(dir, run, "json"), &metadata)?;
    Ok(metadata)
}

pub fn write_samples_csv(
    path: &Path,
    config_id: &str,
    run: u32,
    samples: &[i64],
) -> Result<(), BenchError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::with_capacity(1 << 16, file));
    let to_err = |e: csv::Error| BenchError::Io {
        path: path.to_owned(),
        source: io::Error::other(e),
    };
    w.write_record(CSV_HEADER).map_err(to_err)?;
    let run = run.to_string();
    for (i, s) in samples.iter().enumerate() {
        w.write_record([config_id, run.as_str(), &i.to_string(), &s.to_string()])
            .map_err(to_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one raw samples file. Errors name the file and line.
pub fn read_samples_csv(path: &Path) -> Result<Vec<i64>, BenchError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::Io {
        path: path.to_owned(),
        source: io::Error::other(e),
    })?;
    let corrupt = |line: u64, message: String| BenchError::Corrupt {
        path: path.to_owned(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| corrupt(1, e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(corrupt(
            1,
            format!("expected header {}", CSV_HEADER.join(",")),
        ));
    }
    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(line);
                return Err(corrupt(line, e.to_string()));
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        let iteration: u64 = record
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt(line, "bad iteration".into()))?;
        if iteration != samples.len() as u64 {
            return Err(corrupt(
                line,
                format!("expected iteration {}, found {iteration}", samples.len()),
            ));
        }
        let value: i64 = record
            .get(3)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt(line, format!("bad duration_ns {:?}", record.get(3))))?;
        samples.push(value);
    }
    Ok(samples)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Json {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, BenchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Json {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: u32,
    pub status: RunStatus,
    pub metadata: Option<RunMetadata>,
}

/// Everything persisted for one configuration at one depth.
#[derive(Debug, Clone)]
pub struct ConfigResult {
    pub config: BenchmarkConfig,
    pub dir: PathBuf,
    pub runs: Vec<RunOutcome>,
    pub samples: SampleSet,
}

impl ConfigResult {
    pub fn failed_runs(&self) -> Vec<u32> {
        self.runs
            .iter()
            .filter(|r| r.status != RunStatus::Ok)
            .map(|r| r.run)
            .collect()
    }

    pub fn depth(&self) -> u32 {
        self.config.workload.depth
    }
}

/// Spawns benchmark children. `exe` must accept
/// `child --dir <DIR> --run <K>`, as the `minimon` binary does.
#[derive(Debug, Clone)]
pub struct Launcher {
    pub exe: PathBuf,
}

impl Launcher {
    pub fn new(exe: impl Into<PathBuf>) -> Self {
        Self { exe: exe.into() }
    }

    pub fn current_exe() -> io::Result<Self> {
        Ok(Self::new(std::env::current_exe()?))
    }

    /// Runs every repetition of `config` sequentially, one child each.
    /// Child failures are recorded per run; partial data stays on disk.
    pub fn run_config(
        &self,
        config: &BenchmarkConfig,
        out: &Path,
    ) -> Result<ConfigResult, BenchError> {
        config.validate()?;
        let dir = result_dir(out, &config.config_id, config.workload.depth);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_json(&dir.join(CONFIG_FILE), config)?;

        let mut runs = Vec::with_capacity(config.runs as usize);
        for run in 0..config.runs {
            let output = Command::new(&self.exe)
                .arg("child")
                .arg("--dir")
                .arg(&dir)
                .arg("--run")
                .arg(run.to_string())
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .stderr(Stdio::piped())
                .output()
                .map_err(io_err(&self.exe))?;
            let meta_path = run_file(&dir, run, "json");
            let status = if output.status.success() {
                RunStatus::Ok
            } else {
                RunStatus::Failed(format!(
                    "child exited with {}: {}",
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                ))
            };
            let metadata = read_json::<RunMetadata>(&meta_path).ok();
            let status = match (status, &metadata) {
                (RunStatus::Ok, None) => RunStatus::Failed("child wrote no metadata".into()),
                (s, _) => s,
            };
            runs.push(RunOutcome {
                run,
                status,
                metadata,
            });
        }
        let samples = load_samples(&dir)?;
        Ok(ConfigResult {
            config: config.clone(),
            dir,
            runs,
            samples,
        })
    }

    /// Runs every configuration at every depth.
    pub fn sweep_depths(
        &self,
        configs: &[BenchmarkConfig],
        depths: &[u32],
        out: &Path,
    ) -> Result<Vec<ConfigResult>, BenchError> {
        if depths.is_empty() || depths.contains(&0) {
            return Err(BenchError::InvalidConfig(
                "depths must be non-empty and each at least 1".into(),
            ));
        }
        let mut results = Vec::with_capacity(configs.len() * depths.len());
        for config in configs {
            for &depth in depths {
                results.push(self.run_config(&config.at_depth(depth), out)?);
            }
        }
        Ok(results)
    }
}

/// Loads all `run-<k>.csv` files in a result directory, ordered by run.
pub fn load_samples(dir: &Path) -> Result<SampleSet, BenchError> {
    let mut files: Vec<(u32, PathBuf)> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(Result::ok)
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let run = name
                .strip_prefix("run-")?
                .strip_suffix(".csv")?
                .parse()
                .ok()?;
            Some((run, e.path()))
        })
        .collect();
    files.sort();
    let runs = files
        .iter()
        .map(|(_, p)| read_samples_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleSet { runs })
}

/// A persisted result directory read back for reporting.
#[derive(Debug, Clone)]
pub struct StoredResult {
    pub config: BenchmarkConfig,
    pub dir: PathBuf,
    pub samples: SampleSet,
    pub metadata: Vec<RunMetadata>,
}

impl StoredResult {
    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let config: BenchmarkConfig = read_json(&dir.join(CONFIG_FILE))?;
        let samples = load_samples(dir)?;
        if samples.total() == 0 {
            return Err(BenchError::NoSamples(dir.to_owned()));
        }
        let metadata = (0..config.runs)
            .filter_map(|run| read_json(&run_file(dir, run, "json")).ok())
            .collect();
        Ok(Self {
            config,
            dir: dir.to_owned(),
            samples,
            metadata,
        })
    }

    pub fn post_warmup(&self) -> Vec<i64> {
        self.samples
            .pooled_after_warmup(self.config.warmup_fraction)
    }
}

/// Every `<config_id>/d<depth>/` directory under `out` that has a config file.
pub fn find_result_dirs(out: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut dirs = Vec::new();
    for config_entry in fs::read_dir(out)
        .map_err(io_err(out))?
        .filter_map(Result::ok)
    {
        if !config_entry.path().is_dir() {
            continue;
        }
        for depth_entry in fs::read_dir(config_entry.path())
            .map_err(io_err(&config_entry.path()))?
            .filter_map(Result::ok)
        {
            let p = depth_entry.path();
            if p.join(CONFIG_FILE).is_file() {
                dirs.push(p);
            }
        }
    }
    dirs.sort();
    Ok(dirs)
}
