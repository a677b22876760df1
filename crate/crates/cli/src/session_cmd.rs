use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use entropy_router::backend::ReplayBackend;
use entropy_router::cost::{format_usd, Micros, PriceBook, PricingModel};
use entropy_router::entropy::{DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_VOCAB_SIZE};
use entropy_router::routing::{calibrate_tau, DEFAULT_K, DEFAULT_TAU};
use entropy_router::session::{Session, SessionReport, SessionStatus, WorkStep, DEFAULT_CHECKPOINT_EVERY};
use entropy_router::{trace, EntropyParams, EntropySignal, Role, RoutingConfig};

use crate::config::{self, Trigger};
use crate::EXIT_RESUMABLE;

#[derive(Args)]
pub struct RoutingFlags {
    /// Combined-entropy threshold.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Support inferences per trigger.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: u32,
    /// Trigger when the signal is at or above (`high`) or at or below (`low`) tau.
    #[arg(long, value_enum, default_value_t = Trigger::High)]
    trigger: Trigger,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
    vocab_size: u64,
}

impl RoutingFlags {
    fn params(&self) -> Result<EntropyParams> {
        Ok(EntropyParams::new(self.alpha, self.beta, self.vocab_size, 1e-9)?)
    }
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Recorded trace served by both backends.
    #[arg(long)]
    trace: PathBuf,
    /// Session directory.
    #[arg(long)]
    session: PathBuf,
    /// Continue from the session's latest checkpoint.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    routing: RoutingFlags,
    #[arg(long, default_value_t = DEFAULT_CHECKPOINT_EVERY)]
    checkpoint_every: u64,
    #[arg(long, default_value = "base")]
    base_id: String,
    #[arg(long, default_value = "support")]
    support_id: String,
    /// Base prices as `input/output` dollars per million tokens.
    #[arg(long, default_value = "0/0")]
    base_price: String,
    /// Support prices as `input/output` dollars per million tokens.
    #[arg(long, default_value = "5/25")]
    support_price: String,
}

#[derive(Args)]
pub struct RouteArgs {
    /// Session description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// One prompt per line; each line is one work step.
    #[arg(long)]
    prompts: PathBuf,
    /// Session directory.
    #[arg(long)]
    session: PathBuf,
    /// Continue from the session's latest checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// 1-based inference that should be the first to trigger.
    #[arg(long)]
    target: usize,
    #[command(flatten)]
    routing: RoutingFlags,
}

fn parse_prices(model_id: &str, s: &str) -> Result<PricingModel> {
    let (i, o) = s
        .split_once('/')
        .with_context(|| format!("prices must look like `input/output`, got `{s}`"))?;
    let parse = |x: &str| -> Result<Micros> {
        let v: f64 = x.trim().trim_start_matches('$').parse().with_context(|| format!("bad price `{x}`"))?;
        Ok(Micros::from_dollars(v))
    };
    Ok(PricingModel::new(model_id, parse(i)?, parse(o)?)?)
}

fn print_report(dir: &Path, report: &SessionReport) -> u8 {
    let cp = &report.checkpoint;
    let meter = &cp.cost_accumulator;
    println!("session: {}", dir.display());
    match (&report.status, &report.halt_error) {
        (SessionStatus::Finished, _) => println!("status: finished"),
        (SessionStatus::Halted, Some(err)) => {
            println!("status: halted at step {} ({err}); resume with --resume", cp.inference_log_offset + 1)
        }
        (SessionStatus::Halted, None) => println!("status: halted at step {}", cp.inference_log_offset + 1),
    }
    println!("steps: {}", cp.inference_log_offset);
    println!("switches: {}", cp.routing_state.switch_count);
    println!("support inferences: {}", meter.support_inferences);
    println!("tokens: {}", meter.total_tokens);
    println!("cost: {}", format_usd(&meter.exact_micros(), 6));
    match report.status {
        SessionStatus::Finished => 0,
        SessionStatus::Halted => EXIT_RESUMABLE,
    }
}

fn drive(session: &Session<'_>, work: &[WorkStep], resume: bool, dir: &Path) -> Result<u8> {
    let report = if resume { session.resume(work)? } else { session.run(work)? };
    Ok(print_report(dir, &report))
}

pub fn replay(args: &ReplayArgs) -> Result<u8> {
    let records = Arc::new(
        trace::load_trace(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?,
    );
    let config = RoutingConfig::new(
        args.routing.tau,
        args.routing.k,
        args.routing.trigger == Trigger::High,
        args.routing.params()?,
        &args.base_id,
        &args.support_id,
    )?;
    let base = ReplayBackend::from_records(&args.base_id, records.clone());
    let support = ReplayBackend::from_records(&args.support_id, records.clone());
    let prices = PriceBook::new([
        parse_prices(&args.base_id, &args.base_price)?,
        parse_prices(&args.support_id, &args.support_price)?,
    ]);
    let session = Session::new(&args.session, config, &base, &support, prices)
        .with_checkpoint_every(args.checkpoint_every);
    drive(&session, &WorkStep::from_records(&records), args.resume, &args.session)
}

pub fn route(args: &RouteArgs) -> Result<u8> {
    let file = config::load(&args.config)?;
    let base_dir = args.config.parent().unwrap_or_else(|| Path::new("."));
    let config = file.routing.to_config(&file.base.model_id, &file.support.model_id)?;
    let base = file.base.open(base_dir)?;
    let support = file.support.open(base_dir)?;
    let prices = PriceBook::new([file.base.pricing()?, file.support.pricing()?]);
    let prompts = std::fs::read_to_string(&args.prompts)
        .with_context(|| format!("reading {}", args.prompts.display()))?;
    let work = WorkStep::from_prompt_lines(&prompts);
    let session = Session::new(&args.session, config, &*base, &*support, prices)
        .with_retry(file.retry.policy()?)
        .with_checkpoint_every(file.session.checkpoint_every);
    drive(&session, &work, args.resume, &args.session)
}

pub fn calibrate(args: &CalibrateArgs) -> Result<u8> {
    let records = trace::load_trace(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let params = args.routing.params()?;
    let signals: Vec<EntropySignal> = records
        .iter()
        .map(|r| EntropySignal::from_record(r, &params))
        .collect::<entropy_router::Result<_>>()?;
    println!("{:>4}  {:>10}  {:>9}  {:>9}  {:>9}  {:>10}", "step", "perplexity", "mean prob", "h_p", "h_c", "e_combined");
    for (r, s) in records.iter().zip(&signals) {
        println!(
            "{:>4}  {:>10.4}  {:>9.4}  {:>9.6}  {:>9}  {:>10.6}",
            r.sequence_id,
            s.perplexity,
            s.avg_token_prob,
            s.h_p,
            s.h_c.map_or("---".to_owned(), |h| format!("{h:.6}")),
            s.e_combined
        );
    }
    if args.routing.trigger == Trigger::Low {
        anyhow::bail!("calibration assumes the high trigger direction");
    }
    let cal = calibrate_tau(&signals, args.target)?;
    println!(
        "tau interval for a first trigger at step {}: ({:.6}, {:.6}]",
        args.target, cal.lower_exclusive, cal.upper_inclusive
    );
    println!("recommended tau: {:.6}", cal.recommended);
    let config = RoutingConfig::new(args.routing.tau, args.routing.k, true, params, "base", "support")?;
    let decisions = entropy_router::routing::simulate_policy(&signals, &config)?;
    let support: Vec<String> = decisions
        .iter()
        .enumerate()
        .filter(|(_, d)| d.role == Role::Support)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    println!(
        "with tau {} and k {}: support at steps [{}]",
        args.routing.tau,
        args.routing.k,
        support.join(", ")
    );
    Ok(0)
}
