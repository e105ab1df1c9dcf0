//! Suite files: a JSON list of benchmark configurations plus optional sweep
//! depths and output directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{BenchmarkConfig, FULL_ITERATIONS, FULL_RUNS};

pub const DEFAULT_SUITE_JSON: &str = include_str!("../suites/suite-default.json");

/// File name under the output directory that records the suite that was run.
pub const SUITE_RECORD: &str = "suite.json";

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {path}: {message}")]
    Parse {
        origin: String,
        path: String,
        message: String,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfigFile {
    pub configs: Vec<BenchmarkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl SuiteConfigFile {
    /// Parses and validates. `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, SuiteError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let suite: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SuiteError::Parse {
                origin: origin.to_owned(),
                path,
                message: e.into_inner().to_string(),
            }
        })?;
        suite.validate(origin)?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = fs::read_to_string(path).map_err(|source| SuiteError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self, origin: &str) -> Result<(), SuiteError> {
        let invalid = |message: String| SuiteError::Invalid {
            origin: origin.to_owned(),
            message,
        };
        if self.configs.is_empty() {
            return Err(invalid("configs must not be empty".into()));
        }
        let mut seen = HashSet::new();
        for (i, c) in self.configs.iter().enumerate() {
            if !seen.insert(c.config_id.as_str()) {
                return Err(invalid(format!(
                    "configs[{i}]: duplicate config_id {:?}",
                    c.config_id
                )));
            }
            c.validate()
                .map_err(|e| invalid(format!("configs[{i}]: {e}")))?;
        }
        if let Some(depths) = &self.depths {
            if depths.is_empty() || depths.contains(&0) {
                return Err(invalid(
                    "depths must be non-empty and each at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Switches every config to the full-length protocol.
    pub fn full_scale(&mut self) {
        for c in &mut self.configs {
            c.iterations = FULL_ITERATIONS;
            c.runs = FULL_RUNS;
        }
    }

    pub fn position(&self, config_id: &str) -> Option<usize> {
        self.configs.iter().position(|c| c.config_id == config_id)
    }
}

/// The bundled eight-configuration suite.
pub fn default_suite() -> SuiteConfigFile {
    SuiteConfigFile::parse(DEFAULT_SUITE_JSON, "suite-default.json")
        .expect("bundled suite is valid")
}
