//! Live adapter contract.
//!
//! Request (JSON body of `POST {endpoint}/complete`):
//!
//! | field | type | notes |
//! |-------|------|-------|
//! | `model` | string | backend model id |
//! | `step` | integer | 1-based session position |
//! | `prompt` | string | opaque |
//! | `prompt_tokens` | integer | caller's token estimate |
//! | `logprobs` | bool | always `true` |
//!
//! Response:
//!
//! | field | type | notes |
//! |-------|------|-------|
//! | `input_tokens` | integer | required |
//! | `output_tokens` | integer | required, equals `len(logprobs)` |
//! | `logprobs` | array of numbers | required, natural log, each <= 0 |
//! | `confidence` | number | optional, in `[0, 1]` |
//! | `truncated` | bool | optional, default `false` |
//!
//! `GET {endpoint}/capabilities` returns `{"logprobs": bool, "confidence": bool}`
//! and is checked once when the backend is constructed.
//!
//! Error mapping:
//!
//! | transport outcome | error | retryable |
//! |-------------------|-------|-----------|
//! | connect failure, timeout | `BackendUnavailable` | yes |
//! | HTTP 408, 429, 5xx | `BackendUnavailable` | yes |
//! | other HTTP 4xx | `BackendRejected` | no |
//! | undecodable or invalid body | `BackendRejected` | no |
//! | capabilities or response without logprobs | `LogprobsUnsupported` | no |

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendDescriptor, BackendKind, CompletionRequest, CompletionResult};
use crate::entropy::InferenceRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveRequest {
    pub model: String,
    pub step: u64,
    pub prompt: String,
    pub prompt_tokens: u64,
    pub logprobs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveResponse {
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(default)]
    pub logprobs: Option<Vec<f64>>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub logprobs: bool,
    #[serde(default)]
    pub confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    Connect(String),
    Timeout,
    Status { code: u16, body: String },
    Decode(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Connect(e) => write!(f, "connect: {e}"),
            TransportError::Timeout => f.write_str("timed out"),
            TransportError::Status { code, body } => write!(f, "HTTP {code}: {body}"),
            TransportError::Decode(e) => write!(f, "undecodable response: {e}"),
        }
    }
}

pub trait Transport: Send + Sync {
    fn capabilities(&self) -> std::result::Result<Capabilities, TransportError>;
    fn send(&self, request: &LiveRequest) -> std::result::Result<LiveResponse, TransportError>;
}

fn map_transport(backend: &str, err: TransportError) -> Error {
    let backend = backend.to_owned();
    match err {
        TransportError::Connect(_) | TransportError::Timeout => Error::BackendUnavailable {
            backend,
            reason: err.to_string(),
        },
        TransportError::Status { code, .. } if code == 408 || code == 429 || code >= 500 => {
            Error::BackendUnavailable {
                backend,
                reason: err.to_string(),
            }
        }
        TransportError::Status { .. } | TransportError::Decode(_) => Error::BackendRejected {
            backend,
            reason: err.to_string(),
        },
    }
}

pub struct LiveBackend<T> {
    descriptor: BackendDescriptor,
    transport: T,
}

impl<T: Transport> LiveBackend<T> {
    /// Validates the descriptor and probes the provider; providers without a
    /// logprob channel are refused here rather than mid-session.
    pub fn connect(descriptor: BackendDescriptor, transport: T) -> Result<Self> {
        descriptor.validate()?;
        if descriptor.kind != BackendKind::Live {
            return Err(Error::domain(format!(
                "backend `{}` is not a live backend",
                descriptor.model_id
            )));
        }
        let caps = transport
            .capabilities()
            .map_err(|e| map_transport(&descriptor.model_id, e))?;
        if !caps.logprobs {
            return Err(Error::LogprobsUnsupported {
                backend: descriptor.model_id,
            });
        }
        Ok(Self {
            descriptor,
            transport,
        })
    }
}

impl<T: Transport> Backend for LiveBackend<T> {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult> {
        let model = &self.descriptor.model_id;
        let wire = LiveRequest {
            model: model.clone(),
            step: request.step,
            prompt: request.prompt.to_owned(),
            prompt_tokens: request.prompt_tokens,
            logprobs: true,
        };
        let started = Instant::now();
        let response = self
            .transport
            .send(&wire)
            .map_err(|e| map_transport(model, e))?;
        let latency_ms = started.elapsed().as_secs_f64() * 1e3;

        let token_logprobs = match response.logprobs {
            Some(lps) if !lps.is_empty() || response.output_tokens == 0 => lps,
            _ => {
                return Err(Error::LogprobsUnsupported {
                    backend: model.clone(),
                })
            }
        };
        let record = InferenceRecord {
            sequence_id: request.step,
            role: request.role,
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            token_logprobs,
            task_confidence: response.confidence,
        };
        record.validate().map_err(|reason| Error::BackendRejected {
            backend: model.clone(),
            reason,
        })?;
        Ok(CompletionResult {
            record,
            latency_ms,
            truncated: response.truncated,
        })
    }
}

/// Blocking JSON-over-HTTP transport for the contract above.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base: String,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::domain(format!("http client: {e}")))?;
        Ok(Self {
            client,
            base: endpoint.trim_end_matches('/').to_owned(),
        })
    }

    fn classify(err: reqwest::Error) -> TransportError {
        if err.is_timeout() {
            TransportError::Timeout
        } else if err.is_decode() {
            TransportError::Decode(err.to_string())
        } else {
            TransportError::Connect(err.to_string())
        }
    }

    fn read_json<R: serde::de::DeserializeOwned>(
        resp: reqwest::blocking::Response,
    ) -> std::result::Result<R, TransportError> {
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(TransportError::Status {
                code: status.as_u16(),
                body,
            });
        }
        let bytes = resp.bytes().map_err(Self::classify)?;
        serde_json::from_slice(&bytes).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

impl Transport for HttpTransport {
    fn capabilities(&self) -> std::result::Result<Capabilities, TransportError> {
        let resp = self
            .client
            .get(format!("{}/capabilities", self.base))
            .send()
            .map_err(Self::classify)?;
        Self::read_json(resp)
    }

    fn send(&self, request: &LiveRequest) -> std::result::Result<LiveResponse, TransportError> {
        let resp = self
            .client
            .post(format!("{}/complete", self.base))
            .json(request)
            .send()
            .map_err(Self::classify)?;
        Self::read_json(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Role;
    use crate::error::ErrorKind;

    struct Stub {
        caps: Capabilities,
        reply: std::result::Result<LiveResponse, TransportError>,
    }

    impl Transport for Stub {
        fn capabilities(&self) -> std::result::Result<Capabilities, TransportError> {
            Ok(self.caps)
        }
        fn send(&self, _: &LiveRequest) -> std::result::Result<LiveResponse, TransportError> {
            self.reply.clone()
        }
    }

    fn ok_response() -> LiveResponse {
        LiveResponse {
            input_tokens: 12,
            output_tokens: 2,
            logprobs: Some(vec![-0.1, -0.2]),
            confidence: Some(0.8),
            truncated: false,
        }
    }

    fn backend(reply: std::result::Result<LiveResponse, TransportError>) -> LiveBackend<Stub> {
        let caps = Capabilities {
            logprobs: true,
            confidence: true,
        };
        LiveBackend::connect(
            BackendDescriptor::live("opus", "http://example.invalid"),
            Stub { caps, reply },
        )
        .unwrap()
    }

    fn req() -> CompletionRequest<'static> {
        CompletionRequest {
            step: 5,
            prompt: "p",
            prompt_tokens: 12,
            role: Role::Support,
        }
    }

    #[test]
    fn builds_record_from_response() {
        let r = backend(Ok(ok_response())).complete(&req()).unwrap();
        assert_eq!(r.record.sequence_id, 5);
        assert_eq!(r.record.role, Role::Support);
        assert_eq!(r.record.task_confidence, Some(0.8));
    }

    #[test]
    fn refuses_provider_without_logprobs_at_connect() {
        let stub = Stub {
            caps: Capabilities {
                logprobs: false,
                confidence: false,
            },
            reply: Ok(ok_response()),
        };
        let err = LiveBackend::connect(BackendDescriptor::live("gpt", "http://x"), stub)
            .err()
            .unwrap();
        assert!(matches!(err, Error::LogprobsUnsupported { ref backend } if backend == "gpt"));
    }

    #[test]
    fn error_mapping_table() {
        let cases = [
            (TransportError::Timeout, ErrorKind::BackendUnavailable),
            (TransportError::Connect("refused".into()), ErrorKind::BackendUnavailable),
            (TransportError::Status { code: 503, body: String::new() }, ErrorKind::BackendUnavailable),
            (TransportError::Status { code: 429, body: String::new() }, ErrorKind::BackendUnavailable),
            (TransportError::Status { code: 400, body: String::new() }, ErrorKind::BackendRejected),
            (TransportError::Decode("eof".into()), ErrorKind::BackendRejected),
        ];
        for (t, kind) in cases {
            assert_eq!(backend(Err(t)).complete(&req()).unwrap_err().kind(), kind);
        }
    }

    #[test]
    fn missing_or_invalid_logprobs() {
        let mut resp = ok_response();
        resp.logprobs = None;
        let err = backend(Ok(resp)).complete(&req()).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::LogprobsUnsupported);

        let mut resp = ok_response();
        resp.logprobs = Some(vec![0.5, -0.1]);
        let err = backend(Ok(resp)).complete(&req()).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::BackendRejected);
    }
}
