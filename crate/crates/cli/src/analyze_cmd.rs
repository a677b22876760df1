use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use entropy_router::analytics::{
    find_team, format_thousands, lead_margin, load_series, rank_trajectory, solve_rate, GrowthTable, PlotData,
    ThresholdTable, VelocityReport,
};

use crate::cost_cmd::Format;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    /// Snapshot scores with early and late velocities.
    Growth,
    /// Threshold velocity, crossing time, early points, points per solve.
    Threshold,
    /// Ranking and percentile outperformed at `--at`.
    Rank,
    /// Per-team velocity over `--window`.
    Velocity,
    /// Leader's final margin over the runner-up.
    Margin,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Leaderboard CSV with columns team,t_hours,score[,solves].
    path: Option<PathBuf>,
    #[arg(long = "metric", value_enum, value_delimiter = ',', default_values_t = [Metric::Growth, Metric::Threshold])]
    metrics: Vec<Metric>,
    /// Snapshot hours for the growth table.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 7.0, 24.0, 48.0])]
    snapshots: Vec<f64>,
    /// End of the early window and start of the late one, hours.
    #[arg(long, default_value_t = 7.0)]
    split: f64,
    /// End of the late window, hours.
    #[arg(long, default_value_t = 48.0)]
    end: f64,
    #[arg(long, default_value_t = 10_000.0)]
    threshold: f64,
    /// Window for the early-points column, hours.
    #[arg(long, default_value_t = 1.0)]
    first_window: f64,
    /// Velocity window as `t0,t1` hours (default `0,<split>`).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Vec<f64>,
    /// Time of the ranking snapshot, hours (default: latest recorded time).
    #[arg(long)]
    at: Option<f64>,
    /// Declared size of the full field when the file holds only its top teams.
    #[arg(long)]
    field_size: Option<usize>,
    /// Team for `margin` (default: the leader at the end).
    #[arg(long)]
    team: Option<String>,
    /// Restrict tables to these teams.
    #[arg(long = "only", value_delimiter = ',')]
    only: Vec<String>,
    /// Solve count for a standalone solve-rate computation.
    #[arg(long, requires = "hours")]
    solves: Option<f64>,
    /// Window for `--solves`, hours.
    #[arg(long, requires = "solves")]
    hours: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Directory to write `scores.csv` and `percentiles.csv` into.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

pub fn run(args: &AnalyzeArgs) -> Result<u8> {
    if let (Some(count), Some(hours)) = (args.solves, args.hours) {
        let rate = solve_rate(count, hours)?;
        match args.format {
            Format::Text => println!("solve rate: {rate:.1}/h ({count} over {hours} h; exact {rate})"),
            Format::Csv => print!("count,hours,per_hour\n{count},{hours},{rate}\n"),
        }
        if args.path.is_none() {
            return Ok(0);
        }
    }
    let Some(path) = &args.path else {
        bail!("a leaderboard file is required unless --solves/--hours is given");
    };
    let mut all = load_series(path).with_context(|| format!("reading {}", path.display()))?;
    if !args.only.is_empty() {
        for team in &args.only {
            find_team(&all, team)?;
        }
        all.retain(|s| args.only.iter().any(|t| t == s.team()));
    }
    let latest = all.iter().map(|s| s.end()).fold(0.0, f64::max);

    let mut sections: Vec<String> = Vec::new();
    for metric in &args.metrics {
        let text = match metric {
            Metric::Growth => {
                let t = GrowthTable::build(&all, &args.snapshots, args.split, args.end)?;
                match args.format {
                    Format::Text => t.render_text(),
                    Format::Csv => t.render_csv()?,
                }
            }
            Metric::Threshold => {
                let t = ThresholdTable::build(&all, args.threshold, args.first_window)?;
                match args.format {
                    Format::Text => t.render_text(),
                    Format::Csv => t.render_csv()?,
                }
            }
            Metric::Rank => render_rank(args, &all, args.at.unwrap_or(latest))?,
            Metric::Velocity => render_velocity(args, &all)?,
            Metric::Margin => {
                let leader = match &args.team {
                    Some(t) => t.clone(),
                    None => rank_trajectory(&all, latest, None)?[0].team.clone(),
                };
                let m = lead_margin(&all, &leader)?;
                match args.format {
                    Format::Text => format!("margin: {leader} leads by {} points\n", format_thousands(m)),
                    Format::Csv => format!("team,margin\n{leader},{m}\n"),
                }
            }
        };
        sections.push(text);
    }
    print!("{}", sections.join("\n"));

    if let Some(dir) = &args.emit_plot_data {
        fs::create_dir_all(dir)?;
        let plot = PlotData::build(&all, args.field_size)?;
        fs::write(dir.join("scores.csv"), plot.scores_csv()?)?;
        fs::write(dir.join("percentiles.csv"), plot.percentiles_csv()?)?;
        eprintln!("plot data written to {}", dir.display());
    }
    Ok(0)
}

fn render_rank(args: &AnalyzeArgs, all: &[entropy_router::analytics::LeaderboardSeries], t: f64) -> Result<String> {
    let ranks = rank_trajectory(all, t, args.field_size)?;
    let field = args.field_size.unwrap_or(all.len());
    Ok(match args.format {
        Format::Text => {
            let mut out = format!("ranking at {t}h, field of {field}\n");
            let width = ranks.iter().map(|r| r.team.chars().count()).max().unwrap_or(4).max(4);
            out.push_str(&format!("{:<width$}  {:>4}  {:>10}  {:>13}\n", "Team", "Rank", "Score", "Outperformed"));
            for r in &ranks {
                out.push_str(&format!(
                    "{:<width$}  {:>4}  {:>10}  {:>12.1}%\n",
                    r.team,
                    r.rank,
                    format_thousands(r.score),
                    r.percentile * 100.0
                ));
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("team,t_hours,rank,score,outperformed,field_size,percentile\n");
            for r in &ranks {
                out.push_str(&format!(
                    "{},{t},{},{},{},{field},{}\n",
                    csv_field(&r.team),
                    r.rank,
                    r.score,
                    r.outperformed,
                    r.percentile
                ));
            }
            out
        }
    })
}

fn render_velocity(args: &AnalyzeArgs, all: &[entropy_router::analytics::LeaderboardSeries]) -> Result<String> {
    let window = match args.window.as_slice() {
        [] => (0.0, args.split),
        [a, b] => (*a, *b),
        _ => bail!("--window takes two values"),
    };
    let reports: Vec<VelocityReport> = all
        .iter()
        .map(|s| VelocityReport::compute(s, window, Some(args.threshold), Some(args.end)))
        .collect::<entropy_router::Result<_>>()?;
    let opt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map_or("---".to_owned(), f);
    Ok(match args.format {
        Format::Text => {
            let mut out = format!("velocity over {}-{}h\n", window.0, window.1);
            for r in &reports {
                out.push_str(&format!(
                    "{}: {} pts/h, time to threshold {}, early/late {}, avg pts/solve {}\n",
                    r.team,
                    format_thousands(r.points_per_hour),
                    opt(r.time_to_threshold, &|t| format!("{t:.2}h")),
                    opt(r.early_late_ratio, &|x| format!("{x:.1}x")),
                    opt(r.avg_points_per_solve, &|a| format!("{a:.0}")),
                ));
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("team,t0,t1,points_per_hour,time_to_threshold,early_late_ratio,avg_points_per_solve\n");
            let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            for r in &reports {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    csv_field(&r.team),
                    r.window.0,
                    r.window.1,
                    r.points_per_hour,
                    cell(r.time_to_threshold),
                    cell(r.early_late_ratio),
                    cell(r.avg_points_per_solve)
                ));
            }
            out
        }
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
