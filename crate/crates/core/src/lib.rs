//! Entropy-gated base/support model routing.
//!
//! - [`entropy`]: perplexity, normalized entropy, confidence entropy and
//!   their weighted harmonic mean for one inference.
//! - [`routing`]: the threshold-and-hold switching state machine.
//! - [`backend`] / [`trace`]: replay and live model backends, trace files.
//! - [`cost`]: exact pricing, closed-form projections and metered cost.
//! - [`session`]: the checkpointed orchestration loop.
//! - [`analytics`]: leaderboard velocity and ranking metrics.

pub mod analytics;
pub mod backend;
pub mod cost;
pub mod entropy;
pub mod error;
pub mod routing;
pub mod session;
pub mod trace;
mod table;

pub use entropy::{EntropyParams, EntropySignal, InferenceRecord, Role};
pub use error::{Error, ErrorKind, Result};
pub use routing::{RouteDecision, RoutingConfig, RoutingState};
