//! Monitoring records and their line-oriented text encoding.
//!
//! Every record serializes to exactly one line, fields separated by `;`,
//! with the variant tag first:
//!
//! ```text
//! OER;signature;tin;tout;trace_id;eoi;ess;hostname;session_id
//! DUR;signature;duration
//! AGG;signature;count;sum_duration
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub const FIELD_DELIMITER: char = ';';

const TAG_FULL: &str = "OER";
const TAG_DURATION: &str = "DUR";
const TAG_AGGREGATED: &str = "AGG";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("text field {0:?} contains the field delimiter or a control character")]
    InvalidText(String),
    #[error("malformed record line {line:?}: {reason}")]
    Parse { line: String, reason: String },
}

/// Text that can be embedded in a record line: no `;`, no control characters.
///
/// Shared via `Arc` so that emitting a record on the hot path costs a
/// reference-count increment rather than a string copy.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordText(Arc<str>);

impl RecordText {
    pub fn new(text: impl AsRef<str>) -> Result<Self, RecordError> {
        let text = text.as_ref();
        if text.chars().any(|c| c == FIELD_DELIMITER || c.is_control()) {
            return Err(RecordError::InvalidText(text.to_owned()));
        }
        Ok(Self(Arc::from(text)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for RecordText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for RecordText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for RecordText {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Fully qualified method name.
pub type Signature = RecordText;

/// One method execution with the metadata needed to rebuild the call tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullRecord {
    pub signature: Signature,
    pub tin: u64,
    pub tout: u64,
    pub trace_id: u64,
    pub eoi: u32,
    pub ess: u32,
    pub hostname: RecordText,
    pub session_id: RecordText,
}

/// Only the method name and how long it ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationRecord {
    pub signature: Signature,
    pub duration: u64,
}

/// Sum of `count` consecutive durations of one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedRecord {
    pub signature: Signature,
    pub count: u64,
    pub sum_duration: u64,
}

impl AggregatedRecord {
    pub fn mean_duration(&self) -> f64 {
        self.sum_duration as f64 / self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonitoringRecord {
    Full(FullRecord),
    Duration(DurationRecord),
    Aggregated(AggregatedRecord),
}

impl MonitoringRecord {
    pub fn signature(&self) -> &Signature {
        match self {
            MonitoringRecord::Full(r) => &r.signature,
            MonitoringRecord::Duration(r) => &r.signature,
            MonitoringRecord::Aggregated(r) => &r.signature,
        }
    }

    pub fn serialize(&self) -> String {
        self.to_string()
    }

    pub fn deserialize(line: &str) -> Result<Self, RecordError> {
        line.parse()
    }
}

impl From<FullRecord> for MonitoringRecord {
    fn from(r: FullRecord) -> Self {
        MonitoringRecord::Full(r)
    }
}

impl From<DurationRecord> for MonitoringRecord {
    fn from(r: DurationRecord) -> Self {
        MonitoringRecord::Duration(r)
    }
}

impl From<AggregatedRecord> for MonitoringRecord {
    fn from(r: AggregatedRecord) -> Self {
        MonitoringRecord::Aggregated(r)
    }
}

impl fmt::Display for MonitoringRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonitoringRecord::Full(r) => write!(
                f,
                "{TAG_FULL};{};{};{};{};{};{};{};{}",
                r.signature, r.tin, r.tout, r.trace_id, r.eoi, r.ess, r.hostname, r.session_id
            ),
            MonitoringRecord::Duration(r) => {
                write!(f, "{TAG_DURATION};{};{}", r.signature, r.duration)
            }
            MonitoringRecord::Aggregated(r) => {
                write!(
                    f,
                    "{TAG_AGGREGATED};{};{};{}",
                    r.signature, r.count, r.sum_duration
                )
            }
        }
    }
}

impl FromStr for MonitoringRecord {
    type Err = RecordError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| RecordError::Parse {
            line: line.to_owned(),
            reason,
        };
        let fields: Vec<&str> = line.split(FIELD_DELIMITER).collect();
        let expect_fields = |n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(fail(format!("expected {n} fields, found {}", fields.len())))
            }
        };
        let text = |s: &str| RecordText::new(s).map_err(|e| fail(e.to_string()));
        let num = |name: &str, s: &str| {
            s.parse::<u64>()
                .map_err(|e| fail(format!("field {name}: {e}")))
        };
        let small = |name: &str, s: &str| {
            s.parse::<u32>()
                .map_err(|e| fail(format!("field {name}: {e}")))
        };

        match fields[0] {
            TAG_FULL => {
                expect_fields(9)?;
                let record = FullRecord {
                    signature: text(fields[1])?,
                    tin: num("tin", fields[2])?,
                    tout: num("tout", fields[3])?,
                    trace_id: num("trace_id", fields[4])?,
                    eoi: small("eoi", fields[5])?,
                    ess: small("ess", fields[6])?,
                    hostname: text(fields[7])?,
                    session_id: text(fields[8])?,
                };
                if record.tout < record.tin {
                    return Err(fail("tout precedes tin".into()));
                }
                Ok(record.into())
            }
            TAG_DURATION => {
                expect_fields(3)?;
                Ok(DurationRecord {
                    signature: text(fields[1])?,
                    duration: num("duration", fields[2])?,
                }
                .into())
            }
            TAG_AGGREGATED => {
                expect_fields(4)?;
                let count = num("count", fields[2])?;
                if count == 0 {
                    return Err(fail("count must be at least 1".into()));
                }
                Ok(AggregatedRecord {
                    signature: text(fields[1])?,
                    count,
                    sum_duration: num("sum_duration", fields[3])?,
                }
                .into())
            }
            other => Err(fail(format!("unknown record tag {other:?}"))),
        }
    }
}
