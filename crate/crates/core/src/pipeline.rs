//! Monitoring controller: probes hand records to a bounded queue, and a
//! single writer thread drains the queue to the configured sink.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering};
use std::sync::{Arc, Condvar, Mutex, PoisonError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probe::{ProbeKind, DEFAULT_AGGREGATION_WINDOW};
use crate::queue::{BoundedQueue, QueueKind, RecordQueue, DEFAULT_CAPACITY};
use crate::record::MonitoringRecord;

/// Lines written between explicit flushes of the log file.
pub const FLUSH_EVERY_LINES: u64 = 8192;

const WRITER_BATCH: usize = 512;
const WRITER_POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WriterKind {
    /// One serialized record per line in `output_path`.
    File,
    /// Counts and discards.
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub probe: ProbeKind,
    #[serde(default = "default_queue")]
    pub queue: QueueKind,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_writer")]
    pub writer: WriterKind,
    #[serde(default = "default_window")]
    pub aggregation_window: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_queue() -> QueueKind {
    QueueKind::BlockingLinked
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

fn default_writer() -> WriterKind {
    WriterKind::File
}

fn default_window() -> u64 {
    DEFAULT_AGGREGATION_WINDOW
}

impl PipelineConfig {
    pub fn new(probe: ProbeKind, queue: QueueKind, writer: WriterKind) -> Self {
        Self {
            probe,
            queue,
            queue_capacity: DEFAULT_CAPACITY,
            writer,
            aggregation_window: DEFAULT_AGGREGATION_WINDOW,
            output_path: None,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.queue_capacity = capacity;
        self
    }

    pub fn with_window(mut self, window: u64) -> Self {
        self.aggregation_window = window;
        self
    }

    pub fn with_output(mut self, path: impl Into<PathBuf>) -> Self {
        self.output_path = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.queue_capacity == 0 {
            return Err(PipelineError::InvalidConfig(
                "queue_capacity must be at least 1".into(),
            ));
        }
        if self.aggregation_window == 0 {
            return Err(PipelineError::InvalidConfig(
                "aggregation_window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("file writer needs an output_path")]
    MissingOutputPath,
    #[error("cannot open monitoring log {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("pipeline was already started")]
    AlreadyStarted,
    #[error("failed to spawn writer thread: {0}")]
    Spawn(io::Error),
}

/// Final counters. After shutdown `written == enqueued - overwritten` unless
/// `write_error` is set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub enqueued: u64,
    pub written: u64,
    pub overwritten: u64,
    pub dropped: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_error: Option<String>,
}

const IDLE: u8 = 0;
const RUNNING: u8 = 1;
const STOPPED: u8 = 2;

pub struct MonitoringController {
    config: PipelineConfig,
    queue: Arc<RecordQueue<MonitoringRecord>>,
    phase: AtomicU8,
    dropped: AtomicU64,
    written: Arc<AtomicU64>,
    gate: Arc<PauseGate>,
    writer: Mutex<Option<JoinHandle<Option<String>>>>,
    report: Mutex<Option<PipelineReport>>,
}

pub type PipelineHandle = Arc<MonitoringController>;

impl std::fmt::Debug for MonitoringController {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonitoringController")
            .field("config", &self.config)
            .field("phase", &self.phase.load(Ordering::Relaxed))
            .finish_non_exhaustive()
    }
}

impl MonitoringController {
    pub fn new(config: PipelineConfig) -> Result<PipelineHandle, PipelineError> {
        config.validate()?;
        if config.writer == WriterKind::File && config.output_path.is_none() {
            return Err(PipelineError::MissingOutputPath);
        }
        Ok(Arc::new(Self {
            queue: Arc::new(RecordQueue::new(config.queue, config.queue_capacity)),
            config,
            phase: AtomicU8::new(IDLE),
            dropped: AtomicU64::new(0),
            written: Arc::new(AtomicU64::new(0)),
            gate: Arc::new(PauseGate::default()),
            writer: Mutex::new(None),
            report: Mutex::new(None),
        }))
    }

    /// Builds and starts a controller in one step.
    pub fn start_new(config: PipelineConfig) -> Result<PipelineHandle, PipelineError> {
        let controller = Self::new(config)?;
        controller.start()?;
        Ok(controller)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Opens the sink and spawns the writer thread. A controller starts once.
    pub fn start(&self) -> Result<(), PipelineError> {
        let mut writer = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        if self.phase.load(Ordering::Acquire) != IDLE || writer.is_some() {
            return Err(PipelineError::AlreadyStarted);
        }
        let sink = match self.config.writer {
            WriterKind::Null => Sink::Null,
            WriterKind::File => {
                let path = self
                    .config
                    .output_path
                    .clone()
                    .ok_or(PipelineError::MissingOutputPath)?;
                let file = File::create(&path).map_err(|source| PipelineError::Open {
                    path: path.clone(),
                    source,
                })?;
                Sink::File {
                    out: BufWriter::with_capacity(1 << 16, file),
                    since_flush: 0,
                }
            }
        };
        let queue = Arc::clone(&self.queue);
        let written = Arc::clone(&self.written);
        let gate = Arc::clone(&self.gate);
        let handle = thread::Builder::new()
            .name("minimon-writer".into())
            .spawn(move || writer_loop(&queue, sink, &written, &gate))
            .map_err(PipelineError::Spawn)?;
        *writer = Some(handle);
        self.phase.store(RUNNING, Ordering::Release);
        Ok(())
    }

    pub fn is_running(&self) -> bool {
        self.phase.load(Ordering::Acquire) == RUNNING
    }

    /// Hands a record to the queue. Never performs I/O on the caller's
    /// thread. Records arriving before start or after shutdown are dropped
    /// and counted.
    #[inline]
    pub fn new_monitoring_record(&self, record: MonitoringRecord) {
        if self.phase.load(Ordering::Acquire) != RUNNING || self.queue.put(record).is_err() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn records_enqueued(&self) -> u64 {
        self.queue.stats().enqueued
    }

    pub fn records_written(&self) -> u64 {
        self.written.load(Ordering::Acquire)
    }

    pub fn records_dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn queue_stats(&self) -> crate::queue::QueueStats {
        self.queue.stats()
    }

    /// Parks the writer thread; returns once it has stopped consuming.
    pub fn pause_writer(&self) {
        if self.is_running() {
            self.gate.pause();
        }
    }

    pub fn resume_writer(&self) {
        self.gate.resume();
    }

    /// Closes the producer side, lets the writer drain everything already
    /// queued, and joins it. Calling it again returns the same report.
    pub fn shutdown(&self) -> PipelineReport {
        let mut cached = self.report.lock().unwrap_or_else(PoisonError::into_inner);
        if let Some(report) = cached.as_ref() {
            return report.clone();
        }
        self.phase.store(STOPPED, Ordering::Release);
        self.queue.close();
        self.gate.resume();
        let handle = self
            .writer
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .take();
        let write_error = match handle {
            Some(h) => h
                .join()
                .unwrap_or_else(|_| Some("writer thread panicked".into())),
            None => None,
        };
        let stats = self.queue.stats();
        let report = PipelineReport {
            enqueued: stats.enqueued,
            written: self.records_written(),
            overwritten: stats.overwritten,
            dropped: self.records_dropped(),
            write_error,
        };
        *cached = Some(report.clone());
        report
    }
}

impl Drop for MonitoringController {
    fn drop(&mut self) {
        if self.phase.load(Ordering::Acquire) == RUNNING {
            self.shutdown();
        }
    }
}

enum Sink {
    Null,
    File {
        out: BufWriter<File>,
        since_flush: u64,
    },
}

impl Sink {
    fn write(&mut self, record: &MonitoringRecord) -> io::Result<()> {
        match self {
            Sink::Null => Ok(()),
            Sink::File { out, since_flush } => {
                writeln!(out, "{record}")?;
                *since_flush += 1;
                if *since_flush >= FLUSH_EVERY_LINES {
                    *since_flush = 0;
                    out.flush()?;
                }
                Ok(())
            }
        }
    }

    fn finish(&mut self) -> io::Result<()> {
        match self {
            Sink::Null => Ok(()),
            Sink::File { out, .. } => {
                out.flush()?;
                out.get_ref().sync_data()
            }
        }
    }
}

fn writer_loop(
    queue: &RecordQueue<MonitoringRecord>,
    mut sink: Sink,
    written: &AtomicU64,
    gate: &PauseGate,
) -> Option<String> {
    let mut batch = Vec::with_capacity(WRITER_BATCH);
    let mut error: Option<String> = None;
    loop {
        gate.checkpoint();
        if queue.drain_into(&mut batch, WRITER_BATCH, WRITER_POLL) == 0 {
            if queue.is_closed() && queue.is_empty() {
                break;
            }
            continue;
        }
        let mut ok = 0;
        for record in batch.drain(..) {
            if error.is_some() {
                continue;
            }
            match sink.write(&record) {
                Ok(()) => ok += 1,
                Err(e) => error = Some(e.to_string()),
            }
        }
        written.fetch_add(ok, Ordering::Release);
    }
    if let Err(e) = sink.finish() {
        error.get_or_insert(e.to_string());
    }
    error
}

/// Lets a controlling thread park the writer between batches.
#[derive(Default)]
struct PauseGate {
    requested: AtomicBool,
    state: Mutex<GateState>,
    changed: Condvar,
}

#[derive(Default)]
struct GateState {
    paused: bool,
    parked: bool,
}

impl PauseGate {
    fn pause(&self) {
        let mut s = self.state.lock().unwrap_or_else(PoisonError::into_inner);
        s.paused = true;
        self.requested.store(true, Ordering::Release);
        while !s.parked {
            s = self.changed.wait(s).unwrap_or_else(PoisonError::into_inner);
        }
    }

    fn resume(&self) {
        let mut s = self.state.lock().unwrap_or_else(PoisonError::into_inner);
        s.paused = false;
        self.requested.store(false, Ordering::Release);
        self.changed.notify_all();
    }

    #[inline]
    fn checkpoint(&self) {
        if !self.requested.load(Ordering::Acquire) {
            return;
        }
        let mut s = self.state.lock().unwrap_or_else(PoisonError::into_inner);
        if s.paused {
            s.parked = true;
            self.changed.notify_all();
            while s.paused {
                s = self.changed.wait(s).unwrap_or_else(PoisonError::into_inner);
            }
            s.parked = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{DurationRecord, RecordText};
    use std::time::Instant;

    fn dur(i: u64) -> MonitoringRecord {
        DurationRecord {
            signature: RecordText::new("a.b()").unwrap(),
            duration: i,
        }
        .into()
    }

    fn null_config(queue: QueueKind) -> PipelineConfig {
        PipelineConfig::new(ProbeKind::DirectDuration, queue, WriterKind::Null)
    }

    #[test]
    fn null_writer_counts_records() {
        let p = MonitoringController::start_new(null_config(QueueKind::BlockingLinked)).unwrap();
        for i in 0..100 {
            p.new_monitoring_record(dur(i));
        }
        let report = p.shutdown();
        assert_eq!(report.enqueued, 100);
        assert_eq!(report.written, 100);
        assert_eq!(report.dropped, 0);
    }

    #[test]
    fn file_writer_produces_parseable_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.txt");
        let p = MonitoringController::start_new(
            PipelineConfig::new(
                ProbeKind::DirectDuration,
                QueueKind::BlockingLinked,
                WriterKind::File,
            )
            .with_output(&path),
        )
        .unwrap();
        for i in 0..3 {
            p.new_monitoring_record(dur(i));
        }
        p.shutdown();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: Vec<MonitoringRecord> = text
            .lines()
            .map(|l| MonitoringRecord::deserialize(l).unwrap())
            .collect();
        assert_eq!(parsed, vec![dur(0), dur(1), dur(2)]);
    }

    #[test]
    fn start_twice_is_an_error() {
        let p = MonitoringController::start_new(null_config(QueueKind::SyncRing)).unwrap();
        assert!(matches!(p.start(), Err(PipelineError::AlreadyStarted)));
        p.shutdown();
        assert!(matches!(p.start(), Err(PipelineError::AlreadyStarted)));
    }

    #[test]
    fn unwritable_path_fails_at_startup() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::new(
            ProbeKind::DirectFull,
            QueueKind::BlockingLinked,
            WriterKind::File,
        )
        .with_output(dir.path().join("missing").join("log.txt"));
        let p = MonitoringController::new(cfg).unwrap();
        assert!(matches!(p.start(), Err(PipelineError::Open { .. })));
    }

    #[test]
    fn file_writer_requires_path() {
        let cfg = PipelineConfig::new(
            ProbeKind::DirectFull,
            QueueKind::BlockingLinked,
            WriterKind::File,
        );
        assert!(matches!(
            MonitoringController::new(cfg),
            Err(PipelineError::MissingOutputPath)
        ));
    }

    #[test]
    fn rejects_zero_capacity_and_window() {
        let cfg = null_config(QueueKind::SyncRing).with_capacity(0);
        assert!(MonitoringController::new(cfg).is_err());
        let cfg = null_config(QueueKind::SyncRing).with_window(0);
        assert!(MonitoringController::new(cfg).is_err());
    }

    #[test]
    fn paused_writer_lets_ring_overwrite() {
        let capacity = 8;
        let p = MonitoringController::start_new(
            null_config(QueueKind::SyncRing).with_capacity(capacity),
        )
        .unwrap();
        p.pause_writer();
        for i in 0..(2 * capacity as u64) {
            p.new_monitoring_record(dur(i));
        }
        assert_eq!(p.queue_stats().overwritten, capacity as u64);
        p.resume_writer();
        let report = p.shutdown();
        assert_eq!(report.enqueued, 2 * capacity as u64);
        assert_eq!(report.overwritten, capacity as u64);
        assert_eq!(report.written, report.enqueued - report.overwritten);
    }

    #[test]
    fn records_after_shutdown_are_dropped() {
        let p = MonitoringController::start_new(null_config(QueueKind::BlockingLinked)).unwrap();
        let report = p.shutdown();
        assert_eq!(report, PipelineReport::default());
        p.new_monitoring_record(dur(1));
        assert_eq!(p.records_dropped(), 1);
        // cached report from the first shutdown
        assert_eq!(p.shutdown().dropped, 0);
    }

    #[test]
    fn zero_records_gives_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.txt");
        let p = MonitoringController::start_new(
            PipelineConfig::new(ProbeKind::DirectFull, QueueKind::SyncRing, WriterKind::File)
                .with_output(&path),
        )
        .unwrap();
        let report = p.shutdown();
        assert_eq!(report, PipelineReport::default());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
    }

    #[test]
    fn shutdown_of_idle_pipeline_is_prompt() {
        let p = MonitoringController::start_new(null_config(QueueKind::BlockingLinked)).unwrap();
        let start = Instant::now();
        p.shutdown();
        assert!(start.elapsed() < Duration::from_secs(1));
    }

    #[test]
    fn emission_from_many_threads() {
        let p = MonitoringController::start_new(
            null_config(QueueKind::BlockingLinked).with_capacity(4),
        )
        .unwrap();
        let threads: Vec<_> = (0..4)
            .map(|_| {
                let p = Arc::clone(&p);
                thread::spawn(move || {
                    for i in 0..1000 {
                        p.new_monitoring_record(dur(i));
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        let report = p.shutdown();
        assert_eq!(report.enqueued, 4000);
        assert_eq!(report.written, 4000);
    }
}
