//! Base/support switching policy.
//!
//! The router runs the base model until a base-model inference produces a
//! combined entropy on the trigger side of `tau`, then holds the support
//! model for exactly `k` inferences before handing control back to the base
//! model for re-evaluation. Signals observed during a hold are recorded but
//! never trigger.

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyParams, EntropySignal, Role};
use crate::error::{Error, Result};

/// Default threshold on combined entropy. Lies inside the interval that makes
/// the bundled entropy trace trigger once, at inference 8, under default
/// entropy parameters (see [`calibrate_tau`]).
pub const DEFAULT_TAU: f64 = 0.03;
pub const DEFAULT_K: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    tau: f64,
    k: u32,
    trigger_on_high: bool,
    entropy_params: EntropyParams,
    base_model_id: String,
    support_model_id: String,
}

impl RoutingConfig {
    pub fn new(
        tau: f64,
        k: u32,
        trigger_on_high: bool,
        entropy_params: EntropyParams,
        base_model_id: impl Into<String>,
        support_model_id: impl Into<String>,
    ) -> Result<Self> {
        let base_model_id = base_model_id.into();
        let support_model_id = support_model_id.into();
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        if k == 0 {
            return Err(Error::domain("k must be >= 1"));
        }
        if base_model_id == support_model_id {
            return Err(Error::domain(format!(
                "base and support model ids must differ, both are `{base_model_id}`"
            )));
        }
        Ok(Self {
            tau,
            k,
            trigger_on_high,
            entropy_params,
            base_model_id,
            support_model_id,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn trigger_on_high(&self) -> bool {
        self.trigger_on_high
    }

    pub fn entropy_params(&self) -> &EntropyParams {
        &self.entropy_params
    }

    pub fn base_model_id(&self) -> &str {
        &self.base_model_id
    }

    pub fn support_model_id(&self) -> &str {
        &self.support_model_id
    }

    pub fn model_id(&self, role: Role) -> &str {
        match role {
            Role::Base => &self.base_model_id,
            Role::Support => &self.support_model_id,
        }
    }

    /// Ties count as triggered in both directions.
    pub fn triggers(&self, e_combined: f64) -> bool {
        if self.trigger_on_high {
            e_combined >= self.tau
        } else {
            e_combined <= self.tau
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "remaining", rename_all = "snake_case")]
pub enum Mode {
    BaseMode,
    SupportHold(u32),
}

/// What the most recent `observe` did; only used to label decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastEvent {
    #[default]
    None,
    Triggered,
    Released,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingState {
    pub mode: Mode,
    pub step: u64,
    pub last_signal: Option<EntropySignal>,
    pub switch_count: u64,
    #[serde(default)]
    pub last_event: LastEvent,
}

impl Default for RoutingState {
    fn default() -> Self {
        Self {
            mode: Mode::BaseMode,
            step: 0,
            last_signal: None,
            switch_count: 0,
            last_event: LastEvent::None,
        }
    }
}

impl RoutingState {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn is_well_formed(&self, config: &RoutingConfig) -> bool {
        match self.mode {
            Mode::BaseMode => true,
            Mode::SupportHold(r) => (1..=config.k).contains(&r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    BelowThreshold,
    Triggered,
    Holding,
    ReEvaluating,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub model_id: String,
    pub role: Role,
    pub reason: Reason,
}

/// Picks the model for the next inference.
pub fn decide_next(state: &RoutingState, config: &RoutingConfig) -> RouteDecision {
    let (role, reason) = match (state.mode, state.last_event) {
        (Mode::BaseMode, LastEvent::Released) => (Role::Base, Reason::ReEvaluating),
        (Mode::BaseMode, _) => (Role::Base, Reason::BelowThreshold),
        (Mode::SupportHold(_), LastEvent::Triggered) => (Role::Support, Reason::Triggered),
        (Mode::SupportHold(_), _) => (Role::Support, Reason::Holding),
    };
    RouteDecision {
        model_id: config.model_id(role).to_owned(),
        role,
        reason,
    }
}

/// Advances the state machine with the signal of the inference just completed.
pub fn observe(state: &RoutingState, signal: &EntropySignal, config: &RoutingConfig) -> RoutingState {
    let (mode, switch_count, last_event) = match state.mode {
        Mode::BaseMode if config.triggers(signal.e_combined) => (
            Mode::SupportHold(config.k),
            state.switch_count + 1,
            LastEvent::Triggered,
        ),
        Mode::BaseMode => (Mode::BaseMode, state.switch_count, LastEvent::None),
        Mode::SupportHold(r) if r <= 1 => (Mode::BaseMode, state.switch_count, LastEvent::Released),
        Mode::SupportHold(r) => (Mode::SupportHold(r - 1), state.switch_count, LastEvent::None),
    };
    RoutingState {
        mode,
        step: state.step + 1,
        last_signal: Some(*signal),
        switch_count,
        last_event,
    }
}

/// Runs the policy over a recorded signal sequence. Decision `i` depends
/// only on signals before `i`.
pub fn simulate_policy(signals: &[EntropySignal], config: &RoutingConfig) -> Result<Vec<RouteDecision>> {
    if signals.is_empty() {
        return Err(Error::EmptySequence("signals"));
    }
    let mut state = RoutingState::default();
    let mut decisions = Vec::with_capacity(signals.len());
    for signal in signals {
        decisions.push(decide_next(&state, config));
        state = observe(&state, signal, config);
    }
    Ok(decisions)
}

/// Admissible threshold interval for making a signal sequence trigger first
/// at `target_step` (1-based) with `trigger_on_high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauCalibration {
    /// Largest combined entropy before the target; `tau` must exceed it.
    pub lower_exclusive: f64,
    /// Combined entropy at the target; `tau` may equal it.
    pub upper_inclusive: f64,
    /// Midpoint of the interval.
    pub recommended: f64,
}

pub fn calibrate_tau(signals: &[EntropySignal], target_step: usize) -> Result<TauCalibration> {
    if signals.is_empty() {
        return Err(Error::EmptySequence("signals"));
    }
    if target_step == 0 || target_step > signals.len() {
        return Err(Error::domain(format!(
            "target step {target_step} outside 1..={}",
            signals.len()
        )));
    }
    let target = signals[target_step - 1].e_combined;
    let lower = signals[..target_step - 1]
        .iter()
        .map(|s| s.e_combined)
        .fold(0.0f64, f64::max);
    if lower >= target {
        return Err(Error::domain(format!(
            "no threshold isolates step {target_step}: earlier signal {lower} >= target {target}"
        )));
    }
    Ok(TauCalibration {
        lower_exclusive: lower,
        upper_inclusive: target,
        recommended: 0.5 * (lower + target),
    })
}
