//! Batch runner and evaluator: loads a case corpus, drives the pipeline
//! over it with bounded parallelism, persists per-case artifacts, and
//! compares two runs against ground truth.

pub mod config;
pub mod corpus;
pub mod evaluate;
pub mod run;

use std::path::{Path, PathBuf};

use slso_core::eval::EvalError;
use thiserror::Error;

pub use config::{BackendKind, FileConfig, RunConfig, RunFlags};
pub use corpus::{load_corpus, CaseBundle, Corpus, CorpusError, InvalidCase};
pub use evaluate::cmd_eval;
pub use run::{build_backend, build_orchestrator, cmd_run, execute, CaseOutcome, RunSummary};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CASE_FAILURES: i32 = 1;
    pub const CONFIG: i32 = 2;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid run artifact: {0}")]
    Invalid(String),
    #[error("no truth.json for case {0}")]
    MissingTruth(String),
    #[error("run case ids differ at position {index}: {run_a:?} vs {run_b:?}")]
    CaseIdMismatch { index: usize, run_a: Option<String>, run_b: Option<String> },
    #[error(transparent)]
    Eval(EvalError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Corpus(_) => exit::CONFIG,
            _ => exit::CASE_FAILURES,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
