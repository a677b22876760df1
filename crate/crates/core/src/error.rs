use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by retry policies and CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    EmptySequence,
    MalformedTrace,
    Domain,
    TraceExhausted,
    BackendUnavailable,
    BackendRejected,
    LogprobsUnsupported,
    Alignment,
    ConfigMismatch,
    CorruptCheckpoint,
    CheckpointWrite,
    OutOfRange,
    NotReached,
    MalformedSeries,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),

    #[error(
        "malformed trace{}: {reason}",
        line.map(|l| format!(" at line {l}")).unwrap_or_default()
    )]
    MalformedTrace { line: Option<usize>, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("trace exhausted: step {step} requested, trace has {len} records")]
    TraceExhausted { step: u64, len: usize },

    #[error("backend `{backend}` unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },

    #[error("backend `{backend}` rejected the request: {reason}")]
    BackendRejected { backend: String, reason: String },

    #[error("backend `{backend}` does not return per-token logprobs")]
    LogprobsUnsupported { backend: String },

    #[error("alignment error: {decisions} decisions vs {records} records")]
    Alignment { decisions: usize, records: usize },

    #[error("config mismatch: checkpoint hash {checkpoint}, live config hash {live}")]
    ConfigMismatch { checkpoint: String, live: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint write to {path:?} failed: {source}")]
    CheckpointWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("time {t} h outside series range [{start}, {end}] h")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("threshold {threshold} never reached (final score {final_score})")]
    NotReached { threshold: f64, final_score: f64 },

    #[error("malformed series at line {line}: {reason}")]
    MalformedSeries { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptySequence(_) => ErrorKind::EmptySequence,
            Error::MalformedTrace { .. } => ErrorKind::MalformedTrace,
            Error::Domain(_) => ErrorKind::Domain,
            Error::TraceExhausted { .. } => ErrorKind::TraceExhausted,
            Error::BackendUnavailable { .. } => ErrorKind::BackendUnavailable,
            Error::BackendRejected { .. } => ErrorKind::BackendRejected,
            Error::LogprobsUnsupported { .. } => ErrorKind::LogprobsUnsupported,
            Error::Alignment { .. } => ErrorKind::Alignment,
            Error::ConfigMismatch { .. } => ErrorKind::ConfigMismatch,
            Error::CorruptCheckpoint(_) => ErrorKind::CorruptCheckpoint,
            Error::CheckpointWrite { .. } => ErrorKind::CheckpointWrite,
            Error::OutOfRange { .. } => ErrorKind::OutOfRange,
            Error::NotReached { .. } => ErrorKind::NotReached,
            Error::MalformedSeries { .. } => ErrorKind::MalformedSeries,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
