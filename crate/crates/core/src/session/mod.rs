//! Checkpointed orchestration loop.
//!
//! Each step runs `decide_next → complete (with retries) → entropy →
//! observe → meter`, appending one line to each of four logs. Every
//! `checkpoint_every` steps the logs are synced and a checkpoint naming their
//! exact byte lengths and SHA-256 digests is written atomically. Resuming
//! verifies the digests, truncates any uncommitted tail, and replays from the
//! checkpointed state.
//!
//! Session directory:
//!
//! ```text
//! config.json        routing config snapshot and its hash
//! trace.jsonl        inference records (trace format)
//! decisions.jsonl    one route decision per step
//! entropy.jsonl      one entropy signal per step
//! cost.jsonl         per-step metered cost, exact pico-dollars
//! checkpoint.json    latest checkpoint
//! checkpoints/       checkpoint history, one file per boundary
//! ```

mod checkpoint;
mod retry;

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{config_hash, LogMark, LogMarks, MeterState, SessionCheckpoint, SessionLayout};
pub use retry::RetryPolicy;

use crate::backend::{Backend, CompletionRequest};
use crate::cost::{CostReport, PriceBook, PricingModel, Rate, TOKENS_PER_MILLION};
use crate::entropy::{EntropySignal, InferenceRecord, Role};
use crate::error::{Error, Result};
use crate::routing::{decide_next, observe, Reason, RoutingConfig, RoutingState};
use crate::trace;

pub const DEFAULT_CHECKPOINT_EVERY: u64 = 25;

/// An opaque unit of work for one inference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkStep {
    pub prompt: String,
    pub prompt_tokens: u64,
}

impl WorkStep {
    /// One step per recorded inference, for replay sessions.
    pub fn from_records(records: &[InferenceRecord]) -> Vec<WorkStep> {
        records
            .iter()
            .map(|r| WorkStep {
                prompt: String::new(),
                prompt_tokens: r.input_tokens,
            })
            .collect()
    }

    /// One step per non-empty line.
    pub fn from_prompt_lines(text: &str) -> Vec<WorkStep> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| WorkStep {
                prompt: l.to_owned(),
                prompt_tokens: l.split_whitespace().count() as u64,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub step: u64,
    pub model_id: String,
    pub role: Role,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyLine {
    pub step: u64,
    pub perplexity: f64,
    pub avg_token_prob: f64,
    pub h_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_c: Option<f64>,
    pub e_combined: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLine {
    pub step: u64,
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Exact cost in 10⁻¹² dollars.
    pub picos: u128,
    pub cumulative_picos: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Finished,
    /// Stopped on a backend failure; the checkpoint is resumable.
    Halted,
}

#[derive(Debug)]
pub struct SessionReport {
    pub status: SessionStatus,
    pub checkpoint: SessionCheckpoint,
    pub halt_error: Option<Error>,
}

impl SessionReport {
    pub fn cost(&self) -> CostReport {
        meter_report(&self.checkpoint.cost_accumulator)
    }
}

fn meter_report(meter: &MeterState) -> CostReport {
    let exact = meter.exact_micros();
    let fraction = if meter.inferences == 0 {
        BigRational::zero()
    } else {
        BigRational::new(meter.support_inferences.into(), meter.inferences.into())
    };
    let volume = BigRational::new(meter.total_tokens.into(), BigInt::from(TOKENS_PER_MILLION)) * &fraction;
    let rate = if volume.is_zero() {
        BigRational::zero()
    } else {
        &exact / volume
    };
    CostReport::from_parts(meter.total_tokens, fraction, Rate::from_exact(rate), exact)
}

/// Append-only log with a running length and digest.
struct LogWriter {
    file: File,
    bytes: u64,
    hasher: Sha256,
    lines: u64,
}

impl LogWriter {
    fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)?;
        Ok(Self {
            file,
            bytes: 0,
            hasher: Sha256::new(),
            lines: 0,
        })
    }

    /// Reopens a log at a checkpointed mark, discarding any uncommitted tail.
    fn reopen(path: &Path, mark: &LogMark) -> Result<Self> {
        let corrupt = |msg: String| Error::CorruptCheckpoint(format!("{}: {msg}", path.display()));
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .open(path)
            .map_err(|e| corrupt(e.to_string()))?;
        let len = file.metadata()?.len();
        if len < mark.bytes {
            return Err(corrupt(format!(
                "log holds {len} bytes, checkpoint covers {}",
                mark.bytes
            )));
        }
        let mut hasher = Sha256::new();
        let mut lines = 0u64;
        let mut remaining = mark.bytes;
        let mut buf = vec![0u8; 64 * 1024];
        while remaining > 0 {
            let want = remaining.min(buf.len() as u64) as usize;
            file.read_exact(&mut buf[..want])?;
            hasher.update(&buf[..want]);
            lines += buf[..want].iter().filter(|b| **b == b'\n').count() as u64;
            remaining -= want as u64;
        }
        let digest = hex::encode(hasher.clone().finalize());
        if digest != mark.sha256 {
            return Err(corrupt("content digest differs from checkpoint".into()));
        }
        file.set_len(mark.bytes)?;
        file.seek(SeekFrom::Start(mark.bytes))?;
        Ok(Self {
            file,
            bytes: mark.bytes,
            hasher,
            lines,
        })
    }

    fn append(&mut self, line: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        self.hasher.update(&buf);
        self.bytes += buf.len() as u64;
        self.lines += 1;
        Ok(())
    }

    fn mark(&self) -> LogMark {
        LogMark {
            bytes: self.bytes,
            sha256: hex::encode(self.hasher.clone().finalize()),
        }
    }

    fn sync(&self) -> Result<()> {
        self.file.sync_data()?;
        Ok(())
    }
}

struct Logs {
    trace: LogWriter,
    decisions: LogWriter,
    entropy: LogWriter,
    cost: LogWriter,
}

impl Logs {
    fn create(layout: &SessionLayout) -> Result<Self> {
        Ok(Self {
            trace: LogWriter::create(&layout.trace())?,
            decisions: LogWriter::create(&layout.decisions())?,
            entropy: LogWriter::create(&layout.entropy())?,
            cost: LogWriter::create(&layout.cost())?,
        })
    }

    fn reopen(layout: &SessionLayout, marks: &LogMarks) -> Result<Self> {
        Ok(Self {
            trace: LogWriter::reopen(&layout.trace(), &marks.trace)?,
            decisions: LogWriter::reopen(&layout.decisions(), &marks.decisions)?,
            entropy: LogWriter::reopen(&layout.entropy(), &marks.entropy)?,
            cost: LogWriter::reopen(&layout.cost(), &marks.cost)?,
        })
    }

    fn sync(&self) -> Result<()> {
        self.trace.sync()?;
        self.decisions.sync()?;
        self.entropy.sync()?;
        self.cost.sync()
    }

    fn marks(&self) -> LogMarks {
        LogMarks {
            trace: self.trace.mark(),
            decisions: self.decisions.mark(),
            entropy: self.entropy.mark(),
            cost: self.cost.mark(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigSnapshot {
    session_id: String,
    config_hash: String,
    config: RoutingConfig,
}

/// One routed session bound to a directory.
pub struct Session<'a> {
    layout: SessionLayout,
    session_id: String,
    config: RoutingConfig,
    base: &'a dyn Backend,
    support: &'a dyn Backend,
    prices: PriceBook,
    retry: RetryPolicy,
    checkpoint_every: u64,
    sleep: Box<dyn Fn(Duration) + 'a>,
}

impl<'a> Session<'a> {
    pub fn new(
        dir: impl Into<PathBuf>,
        config: RoutingConfig,
        base: &'a dyn Backend,
        support: &'a dyn Backend,
        prices: PriceBook,
    ) -> Self {
        let layout = SessionLayout::new(dir);
        let session_id = layout
            .root()
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "session".to_owned());
        Self {
            layout,
            session_id,
            config,
            base,
            support,
            prices,
            retry: RetryPolicy::default(),
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            sleep: Box::new(std::thread::sleep),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_checkpoint_every(mut self, steps: u64) -> Self {
        self.checkpoint_every = steps;
        self
    }

    pub fn with_session_id(mut self, id: impl Into<String>) -> Self {
        self.session_id = id.into();
        self
    }

    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + 'a) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn layout(&self) -> &SessionLayout {
        &self.layout
    }

    fn check_setup(&self) -> Result<()> {
        if self.checkpoint_every == 0 {
            return Err(Error::domain("checkpoint_every must be >= 1"));
        }
        for (role, backend) in [(Role::Base, self.base), (Role::Support, self.support)] {
            let expected = self.config.model_id(role);
            if backend.model_id() != expected {
                return Err(Error::domain(format!(
                    "{role} backend serves `{}` but the routing config names `{expected}`",
                    backend.model_id()
                )));
            }
            self.prices.get(expected)?;
        }
        Ok(())
    }

    /// Starts a fresh session. Refuses a directory that already holds one.
    pub fn run(&self, work: &[WorkStep]) -> Result<SessionReport> {
        self.check_setup()?;
        fs::create_dir_all(self.layout.checkpoint_dir())?;
        if self.layout.checkpoint().exists() {
            return Err(Error::domain(format!(
                "{} already holds a session; resume it instead",
                self.layout.root().display()
            )));
        }
        let hash = config_hash(&self.config);
        let snapshot = ConfigSnapshot {
            session_id: self.session_id.clone(),
            config_hash: hash,
            config: self.config.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&snapshot).expect("config serializes");
        bytes.push(b'\n');
        checkpoint::write_atomic(&self.layout.config(), &bytes)?;

        let mut logs = Logs::create(&self.layout)?;
        let state = RoutingState::default();
        let meter = MeterState::default();
        self.write_checkpoint(&logs, &state, &meter, 0, false)?;
        self.drive(&mut logs, state, meter, 0, work)
    }

    /// Continues from the latest checkpoint in the session directory.
    pub fn resume(&self, work: &[WorkStep]) -> Result<SessionReport> {
        let checkpoint = SessionCheckpoint::load(&self.layout.checkpoint())?;
        self.resume_from(checkpoint, work)
    }

    pub fn resume_from(&self, checkpoint: SessionCheckpoint, work: &[WorkStep]) -> Result<SessionReport> {
        self.check_setup()?;
        let live = config_hash(&self.config);
        if checkpoint.config_hash != live {
            return Err(Error::ConfigMismatch {
                checkpoint: checkpoint.config_hash,
                live,
            });
        }
        let offset = checkpoint.inference_log_offset;
        if offset as usize > work.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "checkpoint covers {offset} steps but only {} work steps supplied",
                work.len()
            )));
        }
        let mut logs = Logs::reopen(&self.layout, &checkpoint.logs)?;
        for (name, log) in [
            ("trace", &logs.trace),
            ("decisions", &logs.decisions),
            ("entropy", &logs.entropy),
            ("cost", &logs.cost),
        ] {
            if log.lines != offset {
                return Err(Error::CorruptCheckpoint(format!(
                    "{name} log holds {} lines at the checkpoint mark, expected {offset}",
                    log.lines
                )));
            }
        }
        // Rewind the latest pointer; the tail beyond it is gone.
        self.write_checkpoint(
            &logs,
            &checkpoint.routing_state,
            &checkpoint.cost_accumulator,
            offset,
            checkpoint.finished && offset as usize == work.len(),
        )?;
        self.drive(
            &mut logs,
            checkpoint.routing_state,
            checkpoint.cost_accumulator,
            offset,
            work,
        )
    }

    fn backend(&self, role: Role) -> &dyn Backend {
        match role {
            Role::Base => self.base,
            Role::Support => self.support,
        }
    }

    fn drive(
        &self,
        logs: &mut Logs,
        mut state: RoutingState,
        mut meter: MeterState,
        start: u64,
        work: &[WorkStep],
    ) -> Result<SessionReport> {
        let params = *self.config.entropy_params();
        for (idx, item) in work.iter().enumerate().skip(start as usize) {
            let step = idx as u64 + 1;
            let decision = decide_next(&state, &self.config);
            let backend = self.backend(decision.role);
            let request = CompletionRequest {
                step,
                prompt: &item.prompt,
                prompt_tokens: item.prompt_tokens,
                role: decision.role,
            };
            let outcome = self
                .retry
                .run(&*self.sleep, |_| backend.complete(&request))
                .and_then(|result| {
                    let signal = EntropySignal::from_record(&result.record, &params)?;
                    Ok((result.record, signal))
                });
            let (record, signal) = match outcome {
                Ok(v) => v,
                Err(err) => {
                    let checkpoint = self.write_checkpoint(logs, &state, &meter, step - 1, false)?;
                    return Ok(SessionReport {
                        status: SessionStatus::Halted,
                        checkpoint,
                        halt_error: Some(err),
                    });
                }
            };

            let next = observe(&state, &signal, &self.config);
            let pricing: &PricingModel = self.prices.get(&decision.model_id)?;
            let picos = u128::from(record.input_tokens) * pricing.input_price_per_million.0 as u128
                + u128::from(record.output_tokens) * pricing.output_price_per_million.0 as u128;

            logs.trace.append(&trace::to_line(&record))?;
            logs.decisions.append(&to_json(&DecisionLine {
                step,
                model_id: decision.model_id.clone(),
                role: decision.role,
                reason: decision.reason,
            }))?;
            logs.entropy.append(&to_json(&EntropyLine {
                step,
                perplexity: signal.perplexity,
                avg_token_prob: signal.avg_token_prob,
                h_p: signal.h_p,
                h_c: signal.h_c,
                e_combined: signal.e_combined,
            }))?;
            logs.cost.append(&to_json(&CostLine {
                step,
                model_id: decision.model_id,
                input_tokens: record.input_tokens,
                output_tokens: record.output_tokens,
                picos,
                cumulative_picos: meter.picos + picos,
            }))?;

            meter.picos += picos;
            meter.inferences += 1;
            meter.total_tokens += record.input_tokens + record.output_tokens;
            if decision.role == Role::Support {
                meter.support_inferences += 1;
            }
            state = next;

            if step % self.checkpoint_every == 0 && (step as usize) < work.len() {
                self.write_checkpoint(logs, &state, &meter, step, false)?;
            }
        }
        let checkpoint = self.write_checkpoint(logs, &state, &meter, work.len() as u64, true)?;
        Ok(SessionReport {
            status: SessionStatus::Finished,
            checkpoint,
            halt_error: None,
        })
    }

    fn write_checkpoint(
        &self,
        logs: &Logs,
        state: &RoutingState,
        meter: &MeterState,
        offset: u64,
        finished: bool,
    ) -> Result<SessionCheckpoint> {
        logs.sync()?;
        let checkpoint = SessionCheckpoint {
            session_id: self.session_id.clone(),
            routing_state: state.clone(),
            inference_log_offset: offset,
            logs: logs.marks(),
            cost_accumulator: meter.clone(),
            config_hash: config_hash(&self.config),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            finished,
        };
        checkpoint.save(&self.layout.checkpoint_at(offset))?;
        checkpoint.save(&self.layout.checkpoint())?;
        Ok(checkpoint)
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("log lines serialize")
}

/// Parsed contents of a session's logs.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLogs {
    pub records: Vec<InferenceRecord>,
    pub decisions: Vec<DecisionLine>,
    pub entropy: Vec<EntropyLine>,
    pub costs: Vec<CostLine>,
}

impl SessionLogs {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let layout = SessionLayout::new(dir.as_ref());
        Ok(Self {
            records: trace::load_trace(layout.trace())?,
            decisions: read_lines(&layout.decisions())?,
            entropy: read_lines(&layout.entropy())?,
            costs: read_lines(&layout.cost())?,
        })
    }

    pub fn total_picos(&self) -> u128 {
        self.costs.iter().map(|c| c.picos).sum()
    }
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| Error::MalformedTrace {
                line: Some(i + 1),
                reason: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}
