use std::sync::Arc;

use super::{Backend, BackendDescriptor, BackendKind, CompletionRequest, CompletionResult};
use crate::entropy::InferenceRecord;
use crate::error::{Error, Result};
use crate::trace;

/// Serves recorded inferences by step. Several backends may share one trace.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    descriptor: BackendDescriptor,
    records: Arc<Vec<InferenceRecord>>,
}

impl ReplayBackend {
    pub fn open(descriptor: BackendDescriptor) -> Result<Self> {
        descriptor.validate()?;
        if descriptor.kind != BackendKind::Replay {
            return Err(Error::domain(format!(
                "backend `{}` is not a replay backend",
                descriptor.model_id
            )));
        }
        let path = descriptor.trace_path.as_ref().expect("validated");
        let records = trace::load_trace(path)?;
        Ok(Self {
            descriptor,
            records: Arc::new(records),
        })
    }

    pub fn from_records(model_id: impl Into<String>, records: Arc<Vec<InferenceRecord>>) -> Self {
        Self {
            descriptor: BackendDescriptor::replay(model_id, "<memory>"),
            records,
        }
    }

    pub fn records(&self) -> &Arc<Vec<InferenceRecord>> {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult> {
        let idx = request
            .step
            .checked_sub(1)
            .map(|i| i as usize)
            .filter(|i| *i < self.records.len())
            .ok_or(Error::TraceExhausted {
                step: request.step,
                len: self.records.len(),
            })?;
        let mut record = self.records[idx].clone();
        record.sequence_id = request.step;
        record.role = request.role;
        Ok(CompletionResult {
            record,
            latency_ms: 0.0,
            truncated: false,
        })
    }
}
