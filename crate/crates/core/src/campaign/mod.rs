//! Replicated experiments on the built-in systems: configuration, seeded
//! replicas, crash-safe artifact directories, metric reports and rankings.
//!
//! A campaign directory holds `campaign.json` (resolved configuration and
//! replica status) and one `replica-NNN` directory per finished replica.
//! Replicas are built in `replica-NNN.tmp` and renamed when complete; a failed
//! replica is renamed to `replica-NNN.failed` and keeps its partial repository
//! and an `error.json`. Wall-clock timings live in `timing.json` only, so every
//! other artifact is a pure function of the configuration.

mod config;
mod report;
mod run;
mod store;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use config::{ExperimentConfig, GeneratorKind, MetricSettings, OUTPUT_DIR_ENV};
pub use report::{
    evaluate, rank, rank_summaries, report, CampaignReport, EvaluationSummary, FalsificationRow, MetricsRow, RankRow,
    HISTOGRAM_BINS,
};
pub use run::{replica_dir_name, run_campaign, CampaignOutcome, ReplicaState, ReplicaStatus};
pub use store::{read_jsonl, SampleRow};

use crate::eval::EvalError;
use crate::online::WoganError;
use crate::suts::SutError;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing or malformed artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Wogan(#[from] WoganError),
    #[error(transparent)]
    Sut(#[from] SutError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0} of {1} replicas failed")]
    ReplicasFailed(usize, usize),
}

impl CampaignError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CampaignError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CampaignError::Io { .. } => "io",
            CampaignError::Config(_) => "config",
            CampaignError::Artifact(_) => "artifact",
            CampaignError::Wogan(_) => "algorithm",
            CampaignError::Sut(_) => "sut",
            CampaignError::Eval(_) => "evaluation",
            CampaignError::ReplicasFailed(..) => "replicas_failed",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Record {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }
}
