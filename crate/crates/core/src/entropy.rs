//! Token-level and task-level uncertainty signals for a single inference.
//!
//! | Quantity | Formula |
//! |----------|---------|
//! | [`perplexity`] | `exp(-(1/N) Σ ln p_i)` over output tokens |
//! | [`avg_token_prob`] | `(1/N) Σ p_i` |
//! | [`normalized_entropy`] | `ln P / ln |V|`, clamped to `[ε, 1]` |
//! | [`confidence_entropy`] | `(-c ln c - (1-c) ln(1-c)) / ln 2`, clamped to `[ε, 1]` |
//! | [`combined_entropy`] | `(α/H_p + β/H_c)^-1` |
//!
//! All logarithms are natural. Every function here is pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_VOCAB_SIZE: u64 = 131_072;
pub const DEFAULT_ENTROPY_FLOOR: f64 = 1e-9;
pub const MAX_ENTROPY_FLOOR: f64 = 1e-3;

/// Which side of the router produced an inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Base,
    Support,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Base => "base",
            Role::Support => "support",
        })
    }
}

/// One model call: natural-log probabilities of the emitted tokens plus
/// token accounting. Serializes to one trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceRecord {
    #[serde(rename = "step")]
    pub sequence_id: u64,
    pub role: Role,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(rename = "logprobs")]
    pub token_logprobs: Vec<f64>,
    #[serde(rename = "confidence", default, skip_serializing_if = "Option::is_none")]
    pub task_confidence: Option<f64>,
}

impl InferenceRecord {
    /// Checks the record invariants, naming the offending field on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(i) = self
            .token_logprobs
            .iter()
            .position(|lp| !lp.is_finite() || *lp > 0.0)
        {
            return Err(format!(
                "logprobs[{i}] = {} is not a finite value <= 0",
                self.token_logprobs[i]
            ));
        }
        if !self.token_logprobs.is_empty() && self.output_tokens as usize != self.token_logprobs.len()
        {
            return Err(format!(
                "output_tokens = {} but {} logprobs present",
                self.output_tokens,
                self.token_logprobs.len()
            ));
        }
        if let Some(c) = self.task_confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("confidence = {c} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Weights and normalisation constants for the entropy signals.
///
/// `alpha` and `beta` are rescaled to sum to one on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    alpha: f64,
    beta: f64,
    vocab_size: u64,
    entropy_floor: f64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            vocab_size: DEFAULT_VOCAB_SIZE,
            entropy_floor: DEFAULT_ENTROPY_FLOOR,
        }
    }
}

impl EntropyParams {
    pub fn new(alpha: f64, beta: f64, vocab_size: u64, entropy_floor: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "alpha and beta must be positive, got {alpha}, {beta}"
            )));
        }
        if vocab_size < 2 {
            return Err(Error::domain(format!("vocab_size must be >= 2, got {vocab_size}")));
        }
        if !(entropy_floor > 0.0 && entropy_floor <= MAX_ENTROPY_FLOOR) {
            return Err(Error::domain(format!(
                "entropy_floor must lie in (0, {MAX_ENTROPY_FLOOR}], got {entropy_floor}"
            )));
        }
        let sum = alpha + beta;
        Ok(Self {
            alpha: alpha / sum,
            beta: beta / sum,
            vocab_size,
            entropy_floor,
        })
    }

    pub fn with_vocab_size(self, vocab_size: u64) -> Result<Self> {
        Self::new(self.alpha, self.beta, vocab_size, self.entropy_floor)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    pub fn entropy_floor(&self) -> f64 {
        self.entropy_floor
    }
}

/// Derived uncertainty signals for one inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySignal {
    pub perplexity: f64,
    pub avg_token_prob: f64,
    pub h_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_c: Option<f64>,
    pub e_combined: f64,
}

impl EntropySignal {
    pub fn from_record(record: &InferenceRecord, params: &EntropyParams) -> Result<Self> {
        let perplexity = perplexity(record)?;
        let avg_token_prob = avg_token_prob(record)?;
        let h_p = normalized_entropy(perplexity, params)?;
        let h_c = record
            .task_confidence
            .map(|c| confidence_entropy(c, params))
            .transpose()?;
        let e_combined = combined_entropy(h_p, h_c, params);
        Ok(Self {
            perplexity,
            avg_token_prob,
            h_p,
            h_c,
            e_combined,
        })
    }

    /// A signal carrying only a combined-entropy value; used when driving the
    /// router from precomputed scores.
    pub fn from_combined(e_combined: f64) -> Self {
        Self {
            perplexity: 1.0,
            avg_token_prob: 1.0,
            h_p: e_combined,
            h_c: None,
            e_combined,
        }
    }
}

fn checked_logprobs(record: &InferenceRecord) -> Result<&[f64]> {
    let lps = record.token_logprobs.as_slice();
    if lps.is_empty() {
        return Err(Error::EmptySequence("token_logprobs"));
    }
    if let Some(lp) = lps.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
        return Err(Error::MalformedTrace {
            line: None,
            reason: format!(
                "step {}: logprob {lp} is not a finite value <= 0",
                record.sequence_id
            ),
        });
    }
    Ok(lps)
}

/// Geometric mean of inverse token probabilities.
pub fn perplexity(record: &InferenceRecord) -> Result<f64> {
    let lps = checked_logprobs(record)?;
    let mean = lps.iter().sum::<f64>() / lps.len() as f64;
    // -mean >= 0 so the result is >= 1 up to rounding; pin it.
    Ok((-mean).exp().max(1.0))
}

/// Arithmetic mean of token probabilities.
pub fn avg_token_prob(record: &InferenceRecord) -> Result<f64> {
    let lps = checked_logprobs(record)?;
    Ok(lps.iter().map(|lp| lp.exp()).sum::<f64>() / lps.len() as f64)
}

pub fn normalized_entropy(perplexity: f64, params: &EntropyParams) -> Result<f64> {
    if !(perplexity >= 1.0) || !perplexity.is_finite() {
        return Err(Error::domain(format!("perplexity must be >= 1, got {perplexity}")));
    }
    let h = perplexity.ln() / (params.vocab_size as f64).ln();
    Ok(h.clamp(params.entropy_floor, 1.0))
}

/// Binary Shannon entropy of a task confidence, in units of ln 2.
pub fn confidence_entropy(c: f64, params: &EntropyParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("task confidence must lie in [0, 1], got {c}")));
    }
    let h = (xlnx(c) + xlnx(1.0 - c)) / -std::f64::consts::LN_2;
    Ok(h.clamp(params.entropy_floor, 1.0))
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Weighted harmonic mean of the two entropies. Without a task-confidence
/// entropy the token entropy passes through unchanged.
pub fn combined_entropy(h_p: f64, h_c: Option<f64>, params: &EntropyParams) -> f64 {
    match h_c {
        None => h_p,
        Some(h_c) => 1.0 / (params.alpha / h_p + params.beta / h_c),
    }
}
