//! TOML description of a routed session for `erouter route`.
//!
//! ```toml
//! [routing]
//! tau = 0.03
//! k = 2
//! trigger = "high"        # or "low"
//!
//! [session]
//! checkpoint_every = 25
//!
//! [retry]
//! max_attempts = 3
//! base_delay_ms = 250
//! backoff_multiplier = 2.0
//!
//! [base]
//! model_id = "base-model"
//! kind = "live"
//! endpoint = "http://127.0.0.1:8080"
//!
//! [support]
//! model_id = "support-model"
//! kind = "replay"
//! trace = "support.jsonl"   # relative to this file
//! input_price = 5.0         # dollars per million tokens
//! output_price = 25.0
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use entropy_router::backend::{Backend, BackendDescriptor, BackendKind, HttpTransport, LiveBackend, ReplayBackend};
use entropy_router::cost::{Micros, PricingModel};
use entropy_router::entropy::{DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_ENTROPY_FLOOR, DEFAULT_VOCAB_SIZE};
use entropy_router::routing::{DEFAULT_K, DEFAULT_TAU};
use entropy_router::session::{RetryPolicy, DEFAULT_CHECKPOINT_EVERY};
use entropy_router::{EntropyParams, ErrorKind, RoutingConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    #[default]
    High,
    Low,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteFile {
    #[serde(default)]
    pub routing: RoutingSection,
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub retry: RetrySection,
    pub base: BackendSection,
    pub support: BackendSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingSection {
    pub tau: f64,
    pub k: u32,
    pub trigger: Trigger,
    pub alpha: f64,
    pub beta: f64,
    pub vocab_size: u64,
    pub entropy_floor: f64,
}

impl Default for RoutingSection {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            k: DEFAULT_K,
            trigger: Trigger::High,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            vocab_size: DEFAULT_VOCAB_SIZE,
            entropy_floor: DEFAULT_ENTROPY_FLOOR,
        }
    }
}

impl RoutingSection {
    pub fn entropy_params(&self) -> Result<EntropyParams> {
        Ok(EntropyParams::new(self.alpha, self.beta, self.vocab_size, self.entropy_floor)?)
    }

    pub fn to_config(&self, base_id: &str, support_id: &str) -> Result<RoutingConfig> {
        Ok(RoutingConfig::new(
            self.tau,
            self.k,
            self.trigger == Trigger::High,
            self.entropy_params()?,
            base_id,
            support_id,
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub checkpoint_every: u64,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub backoff_multiplier: f64,
}

impl Default for RetrySection {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 250,
            backoff_multiplier: 2.0,
        }
    }
}

impl RetrySection {
    pub fn policy(&self) -> Result<RetryPolicy> {
        Ok(RetryPolicy::new(
            self.max_attempts,
            Duration::from_millis(self.base_delay_ms),
            self.backoff_multiplier,
            [ErrorKind::BackendUnavailable],
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub model_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub input_price: f64,
    #[serde(default)]
    pub output_price: f64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl BackendSection {
    pub fn pricing(&self) -> Result<PricingModel> {
        Ok(PricingModel::new(
            self.model_id.clone(),
            Micros::from_dollars(self.input_price),
            Micros::from_dollars(self.output_price),
        )?)
    }

    /// Builds the backend; live providers are probed for logprob support here.
    pub fn open(&self, base_dir: &Path) -> Result<Box<dyn Backend>> {
        match self.kind {
            BackendKind::Replay => {
                let trace = self
                    .trace
                    .as_ref()
                    .with_context(|| format!("replay backend `{}` needs `trace`", self.model_id))?;
                let path = base_dir.join(trace);
                let backend = ReplayBackend::open(BackendDescriptor::replay(self.model_id.clone(), &path))
                    .with_context(|| format!("loading {}", path.display()))?;
                Ok(Box::new(backend))
            }
            BackendKind::Live => {
                let endpoint = self
                    .endpoint
                    .as_ref()
                    .with_context(|| format!("live backend `{}` needs `endpoint`", self.model_id))?;
                let transport = HttpTransport::new(endpoint, Duration::from_millis(self.timeout_ms))?;
                let backend = LiveBackend::connect(BackendDescriptor::live(self.model_id.clone(), endpoint), transport)?;
                Ok(Box::new(backend))
            }
        }
    }
}

pub fn load(path: &Path) -> Result<RouteFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
