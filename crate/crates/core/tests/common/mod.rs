#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use entropy_router::backend::{Backend, BackendDescriptor, CompletionRequest, CompletionResult, ReplayBackend};
use entropy_router::cost::{PriceBook, PricingModel};
use entropy_router::routing::{DEFAULT_K, DEFAULT_TAU};
use entropy_router::session::SessionLayout;
use entropy_router::{trace, EntropyParams, Error, InferenceRecord, Result, Role, RoutingConfig};

pub const BASE: &str = "base-model";
pub const SUPPORT: &str = "support-model";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_records() -> Arc<Vec<InferenceRecord>> {
    Arc::new(trace::load_trace(fixture("entropy_trace.jsonl")).unwrap())
}

pub fn default_config() -> RoutingConfig {
    RoutingConfig::new(DEFAULT_TAU, DEFAULT_K, true, EntropyParams::default(), BASE, SUPPORT).unwrap()
}

pub fn prices() -> PriceBook {
    PriceBook::new([PricingModel::free(BASE), PricingModel::premium_support(SUPPORT)])
}

/// Deterministic pseudo-random trace with a mix of confident and uncertain
/// inferences.
pub fn synthetic_records(n: u64, seed: u64) -> Arc<Vec<InferenceRecord>> {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x
    };
    Arc::new(
        (1..=n)
            .map(|i| {
                let out = 1 + next() % 6;
                let spread = if next() % 5 == 0 { 3.0 } else { 0.05 };
                let token_logprobs = (0..out).map(|_| -((next() % 1000) as f64 / 1000.0) * spread).collect();
                InferenceRecord {
                    sequence_id: i,
                    role: Role::Base,
                    input_tokens: 100 + next() % 20_000,
                    output_tokens: out,
                    token_logprobs,
                    task_confidence: if next() % 2 == 0 { Some((next() % 1000) as f64 / 1000.0) } else { None },
                }
            })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug)]
pub enum Fault {
    /// Panics, as a killed process would stop.
    Panic,
    /// Fails with a retryable error this many times per step, then recovers.
    Unavailable(u32),
    /// Always fails with a retryable error.
    Down,
    Rejected,
}

/// Replay backend with injected faults at chosen steps.
pub struct FaultyBackend {
    inner: ReplayBackend,
    faults: HashMap<u64, Fault>,
    every_step: Option<Fault>,
    attempts: Mutex<HashMap<u64, u32>>,
    pub calls: AtomicU32,
}

impl FaultyBackend {
    pub fn new(inner: ReplayBackend) -> Self {
        Self {
            inner,
            faults: HashMap::new(),
            every_step: None,
            attempts: Mutex::new(HashMap::new()),
            calls: AtomicU32::new(0),
        }
    }

    pub fn at(mut self, step: u64, fault: Fault) -> Self {
        self.faults.insert(step, fault);
        self
    }

    pub fn always(mut self, fault: Fault) -> Self {
        self.every_step = Some(fault);
        self
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for FaultyBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        self.inner.descriptor()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<CompletionResult> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let attempt = {
            let mut a = self.attempts.lock().unwrap();
            let n = a.entry(request.step).or_insert(0);
            *n += 1;
            *n
        };
        let unavailable = || Error::BackendUnavailable {
            backend: self.model_id().to_owned(),
            reason: "injected".into(),
        };
        match self.faults.get(&request.step).copied().or(self.every_step) {
            Some(Fault::Panic) => panic!("injected crash at step {}", request.step),
            Some(Fault::Unavailable(n)) if attempt <= n => Err(unavailable()),
            Some(Fault::Down) => Err(unavailable()),
            Some(Fault::Rejected) => Err(Error::BackendRejected {
                backend: self.model_id().to_owned(),
                reason: "injected".into(),
            }),
            _ => self.inner.complete(request),
        }
    }
}

pub fn read_logs(dir: &Path) -> Vec<Vec<u8>> {
    let layout = SessionLayout::new(dir);
    [layout.trace(), layout.decisions(), layout.entropy(), layout.cost()]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect()
}

/// Appends a torn, unterminated line to every log, as a crash mid-write would.
pub fn tear_logs(dir: &Path) {
    use std::io::Write;
    let layout = SessionLayout::new(dir);
    for p in [layout.trace(), layout.decisions(), layout.entropy(), layout.cost()] {
        let mut f = std::fs::OpenOptions::new().append(true).open(p).unwrap();
        f.write_all(b"{\"step\":99,\"tor").unwrap();
    }
}
