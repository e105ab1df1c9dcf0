//! In-process method monitoring with interchangeable probes, queues and
//! writers, plus a benchmark harness that measures what each
//! combination costs.
//!
//! Data flow: a [`probe`] builds a [`record::MonitoringRecord`] at method
//! exit and hands it to the [`pipeline::MonitoringController`], which puts it
//! into a bounded [`queue`]; a writer thread drains the queue to a log file.

pub mod bench;
pub mod cli;
pub mod clock;
pub mod pipeline;
pub mod probe;
pub mod queue;
pub mod record;
pub mod report;
pub mod stats;
pub mod suite;
pub mod trace;
pub mod workload;

pub use bench::{BenchmarkConfig, Launcher, SampleSet};
pub use pipeline::{
    MonitoringController, PipelineConfig, PipelineHandle, PipelineReport, WriterKind,
};
pub use probe::ProbeKind;
pub use queue::{QueueKind, QueueStats};
pub use record::{AggregatedRecord, DurationRecord, FullRecord, MonitoringRecord};
pub use stats::{Direction, Scalar};
pub use workload::WorkloadParams;

/// Summary statistics in double precision.
pub type SummaryStats = stats::Summary<f64>;
/// Summary statistics in single precision.
pub type SummaryStatsF32 = stats::Summary<f32>;
pub type Comparison = stats::Comparison<f64>;
pub type ComparisonF32 = stats::Comparison<f32>;
