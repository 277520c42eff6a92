//! Run configuration for the benchmark harness.

use powerlin::evaluation::PfVset;
use powerlin::linear::Method;
use powerlin::opf::LossSplit;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown method id {0} (valid: 1-7)")]
    UnknownMethod(u8),
    #[error("{0} baselines given for {1} cases (one per case required)")]
    BaselineCount(usize, usize),
    #[error("baseline not found: {0}")]
    BaselineNotFound(PathBuf),
    #[error("case not found: {0}")]
    CaseNotFound(PathBuf),
    #[error("alpha map: {0}")]
    Alpha(String),
    #[error("loss iterations must be at least 1")]
    ZeroIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Human-readable tables.
    Text,
    /// Comma-separated values with the same numeric content as the report.
    Csv,
    /// Structured JSON report.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsFSource {
    /// Re-price the post-validation dispatch, slack pickup included
    /// (default).
    Post,
    /// Use the linear OPF's own objective.
    Pre,
}

/// How the metric phase schedules its (method, case) cells. Timing always
/// runs serially regardless of this setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    /// Fan cells across the rayon pool (default when the `parallel`
    /// feature is enabled; falls back to sequential otherwise).
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

/// One entry of the per-branch α override file for method 7.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct AlphaEntry {
    pub from: usize,
    pub to: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub cases: Vec<PathBuf>,
    pub baselines: Vec<PathBuf>,
    pub methods: Vec<Method>,
    /// Loss-loop iteration count for methods 6/7.
    pub iters: usize,
    /// Timing repetitions; 0 skips the timing phase.
    pub repeat: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub pf_vset: PfVset,
    pub loss_split: LossSplit,
    pub alpha: Option<Vec<AlphaEntry>>,
    pub eps_f_source: EpsFSource,
    pub parallelism: Parallelism,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iters == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.baselines.len() != self.cases.len() {
            return Err(ConfigError::BaselineCount(self.baselines.len(), self.cases.len()));
        }
        for c in &self.cases {
            if !c.exists() {
                return Err(ConfigError::CaseNotFound(c.clone()));
            }
        }
        for b in &self.baselines {
            if !b.exists() {
                return Err(ConfigError::BaselineNotFound(b.clone()));
            }
        }
        Ok(())
    }
}

pub fn parse_methods(ids: &[u8]) -> Result<Vec<Method>, ConfigError> {
    ids.iter()
        .map(|&id| Method::from_id(id).ok_or(ConfigError::UnknownMethod(id)))
        .collect()
}
