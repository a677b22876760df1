//! Model backends: a uniform completion interface with a deterministic
//! replay realization and a live network realization.

mod live;
mod replay;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use live::{
    Capabilities, HttpTransport, LiveBackend, LiveRequest, LiveResponse, Transport, TransportError,
};
pub use replay::ReplayBackend;

use crate::entropy::{InferenceRecord, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub model_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub price_ref: Option<String>,
}

impl BackendDescriptor {
    pub fn replay(model_id: impl Into<String>, trace_path: impl Into<PathBuf>) -> Self {
        Self {
            model_id: model_id.into(),
            kind: BackendKind::Replay,
            endpoint: None,
            trace_path: Some(trace_path.into()),
            price_ref: None,
        }
    }

    pub fn live(model_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            kind: BackendKind::Live,
            endpoint: Some(endpoint.into()),
            trace_path: None,
            price_ref: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BackendKind::Live if self.endpoint.is_none() => Err(Error::domain(format!(
                "live backend `{}` needs an endpoint",
                self.model_id
            ))),
            BackendKind::Replay if self.trace_path.is_none() => Err(Error::domain(format!(
                "replay backend `{}` needs a trace path",
                self.model_id
            ))),
            _ => Ok(()),
        }
    }
}

/// One unit of work handed to a backend. The prompt is opaque.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    /// 1-based position of the inference in its session.
    pub step: u64,
    pub prompt: &'a str,
    pub prompt_tokens: u64,
    /// Which router side selected this backend.
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub record: InferenceRecord,
    pub latency_ms: f64,
    pub truncated: bool,
}

pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult>;

    fn model_id(&self) -> &str {
        &self.descriptor().model_id
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn descriptor(&self) -> &BackendDescriptor {
        (**self).descriptor()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn descriptor(&self) -> &BackendDescriptor {
        (**self).descriptor()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult> {
        (**self).complete(request)
    }
}
