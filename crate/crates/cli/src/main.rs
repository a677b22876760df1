mod analyze_cmd;
mod config;
mod cost_cmd;
mod session_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entropy_router::ErrorKind;

/// Exit status for a session that stopped with a resumable checkpoint.
pub const EXIT_RESUMABLE: u8 = 3;
/// Exit status for a checkpoint that cannot be trusted.
pub const EXIT_CORRUPT: u8 = 4;

#[derive(Parser)]
#[command(name = "erouter", version, about = "Entropy-gated model routing, cost projection and leaderboard analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project inference cost across token volumes and hold lengths.
    Cost(cost_cmd::CostArgs),
    /// Velocity, threshold and ranking metrics over leaderboard series.
    Analyze(analyze_cmd::AnalyzeArgs),
    /// Run or resume a session whose backends replay a recorded trace.
    Replay(session_cmd::ReplayArgs),
    /// Run or resume a session described by a TOML config.
    Route(session_cmd::RouteArgs),
    /// Find the threshold interval that first triggers at a given step.
    Calibrate(session_cmd::CalibrateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cost(args) => cost_cmd::run(&args),
        Command::Analyze(args) => analyze_cmd::run(&args),
        Command::Replay(args) => session_cmd::replay(&args),
        Command::Route(args) => session_cmd::route(&args),
        Command::Calibrate(args) => session_cmd::calibrate(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.downcast_ref::<entropy_router::Error>() else {
        return 1;
    };
    match e.kind() {
        ErrorKind::CorruptCheckpoint | ErrorKind::ConfigMismatch => EXIT_CORRUPT,
        ErrorKind::CheckpointWrite | ErrorKind::Io => EXIT_RESUMABLE,
        _ => 1,
    }
}
