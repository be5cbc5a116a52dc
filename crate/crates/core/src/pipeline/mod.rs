//! File-level stages: each reads its inputs from disk, writes tables,
//! structured mirrors and plot data into the output directory, and records
//! what it read and wrote in a provenance file.
//!
//! Stages communicate only through the output directory, so running
//! `ingest`, `screen`, `cluster` and `simulate` one after another produces
//! the same files as [`cmd_pipeline`].

mod config;
mod output;
mod stages;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ClusterConfig, FlagConfig, PlayerSelection, RunConfig, SimulateConfig, DEFAULT_SEED};
pub use output::{sha256_file, FileDigest, OutDir, Provenance};
pub use stages::{
    cmd_cluster, cmd_ingest, cmd_pipeline, cmd_screen, cmd_simulate, cmd_synth, files, ScreeningRow, SimulationRow,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Prize(#[from] crate::prizes::PrizeError),
    #[error(transparent)]
    Cluster(#[from] crate::cluster::ClusterError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Sim(#[from] crate::montecarlo::SimError),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format { path: path.into(), message: message.to_string() }
    }
}

/// Outcome of a stage that ran to completion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageReport {
    /// Rows or players skipped because of their own errors.
    pub row_errors: usize,
    /// Lines for the console.
    pub messages: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl StageReport {
    /// 0 for a clean run, 2 when some rows or players were skipped.
    pub fn exit_code(&self) -> i32 {
        if self.row_errors > 0 {
            2
        } else {
            0
        }
    }

    fn absorb(&mut self, other: StageReport) {
        self.row_errors += other.row_errors;
        self.messages.extend(other.messages);
        self.outputs.extend(other.outputs);
    }
}
