use serde::Serialize;

use super::{
    avg_points_per_solve, early_late_ratio, rank_trajectory, time_to_threshold, velocity_to_threshold,
    window_velocity, LeaderboardSeries,
};
use crate::error::{Error, Result};
use crate::table::{align_columns, csv_string};

/// Rounds to an integer and groups thousands: `1670.9` → `1,671`.
pub fn format_thousands(v: f64) -> String {
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else { v.to_string() };
    }
    let digits = format!("{:.0}", v.abs());
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if v < 0.0 && digits != "0" {
        out.insert(0, '-');
    }
    out
}

fn hours_label(h: f64) -> String {
    if h.fract() == 0.0 {
        format!("{h:.0}h")
    } else {
        format!("{h}h")
    }
}

fn threshold_label(x: f64) -> String {
    if x >= 1000.0 && x % 1000.0 == 0.0 {
        format!("{}K", x / 1000.0)
    } else {
        format!("{x}")
    }
}

fn ratio_cell(r: f64) -> String {
    if r.is_finite() {
        format!("{r:.1}x")
    } else {
        "inf".into()
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "---".to_owned(), f)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "inf".into()
    }
}

/// Per-team velocity summary over one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityReport {
    pub team: String,
    pub window: (f64, f64),
    pub points_per_hour: f64,
    pub time_to_threshold: Option<f64>,
    /// Window velocity over velocity on `[window.1, late_end]`.
    pub early_late_ratio: Option<f64>,
    pub avg_points_per_solve: Option<f64>,
}

impl VelocityReport {
    /// `threshold` and `late_end` are optional; an unreached threshold leaves
    /// `time_to_threshold` empty.
    pub fn compute(
        series: &LeaderboardSeries,
        window: (f64, f64),
        threshold: Option<f64>,
        late_end: Option<f64>,
    ) -> Result<Self> {
        let points_per_hour = window_velocity(series, window.0, window.1)?;
        let time_to_threshold = threshold.map(|x| reached(time_to_threshold(series, x))).transpose()?.flatten();
        let early_late_ratio = match late_end {
            None => None,
            Some(end) if window.0 == 0.0 => Some(early_late_ratio(series, window.1, end)?),
            Some(end) => {
                let late = window_velocity(series, window.1, end)?;
                Some(if late == 0.0 { f64::INFINITY } else { points_per_hour / late })
            }
        };
        Ok(Self {
            team: series.team().to_owned(),
            window,
            points_per_hour,
            time_to_threshold,
            early_late_ratio,
            avg_points_per_solve: avg_points_per_solve(series),
        })
    }
}

fn reached(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotReached { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub team: String,
    pub snapshot_scores: Vec<f64>,
    pub early_velocity: f64,
    pub late_velocity: f64,
    pub early_late_ratio: f64,
}

/// Snapshot scores plus early and late velocities split at `split`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthTable {
    pub snapshot_hours: Vec<f64>,
    pub split: f64,
    pub end: f64,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    pub fn build(all: &[LeaderboardSeries], snapshot_hours: &[f64], split: f64, end: f64) -> Result<Self> {
        let rows = all
            .iter()
            .map(|s| {
                Ok(GrowthRow {
                    team: s.team().to_owned(),
                    snapshot_scores: snapshot_hours.iter().map(|&h| s.score_at(h)).collect::<Result<_>>()?,
                    early_velocity: window_velocity(s, 0.0, split)?,
                    late_velocity: window_velocity(s, split, end)?,
                    early_late_ratio: early_late_ratio(s, split, end)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            snapshot_hours: snapshot_hours.to_vec(),
            split,
            end,
            rows,
        })
    }

    pub fn render_text(&self) -> String {
        let mut header = vec!["Team".to_owned()];
        header.extend(self.snapshot_hours.iter().map(|&h| hours_label(h)));
        header.push(format!("Pts/h (0-{})", hours_label(self.split)));
        header.push(format!("Pts/h ({}-{})", self.split, hours_label(self.end)));
        header.push("Early/Late".to_owned());
        let mut rows = vec![header];
        for r in &self.rows {
            let mut cells = vec![r.team.clone()];
            cells.extend(r.snapshot_scores.iter().map(|&s| format_thousands(s)));
            cells.push(format_thousands(r.early_velocity));
            cells.push(format_thousands(r.late_velocity));
            cells.push(ratio_cell(r.early_late_ratio));
            rows.push(cells);
        }
        align_columns(&rows)
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut header = vec!["team".to_owned()];
        header.extend(self.snapshot_hours.iter().map(|h| format!("score_{h}h")));
        header.extend(["early_pts_per_h", "late_pts_per_h", "early_late_ratio"].map(String::from));
        let body = self.rows.iter().map(|r| {
            let mut cells = vec![r.team.clone()];
            cells.extend(r.snapshot_scores.iter().map(|&s| num(s)));
            cells.extend([num(r.early_velocity), num(r.late_velocity), num(r.early_late_ratio)]);
            cells
        });
        csv_string(std::iter::once(header).chain(body))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub team: String,
    /// `threshold / time_to_threshold`; empty when never reached.
    pub velocity: Option<f64>,
    pub time_to_threshold: Option<f64>,
    pub points_in_first_window: f64,
    pub avg_points_per_solve: Option<f64>,
}

/// Threshold velocity, crossing time, early points and points per solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub threshold: f64,
    pub first_window: f64,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    pub fn build(all: &[LeaderboardSeries], threshold: f64, first_window: f64) -> Result<Self> {
        let rows = all
            .iter()
            .map(|s| {
                Ok(ThresholdRow {
                    team: s.team().to_owned(),
                    velocity: reached(velocity_to_threshold(s, threshold))?,
                    time_to_threshold: reached(time_to_threshold(s, threshold))?,
                    points_in_first_window: s.score_at_or_final(first_window)?,
                    avg_points_per_solve: avg_points_per_solve(s),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            threshold,
            first_window,
            rows,
        })
    }

    pub fn render_text(&self) -> String {
        let mut rows = vec![vec![
            "Team".to_owned(),
            "Velocity (pts/h)".to_owned(),
            format!("Time to {}", threshold_label(self.threshold)),
            format!("Points in {}", hours_label(self.first_window)),
            "Avg pts/solve".to_owned(),
        ]];
        for r in &self.rows {
            rows.push(vec![
                r.team.clone(),
                opt(r.velocity, |v| if v.is_finite() { format!("{v:.0}") } else { "inf".into() }),
                opt(r.time_to_threshold, |t| format!("{t:.2}h")),
                format!("{:.0}", r.points_in_first_window),
                opt(r.avg_points_per_solve, |a| format!("{a:.0}")),
            ]);
        }
        align_columns(&rows)
    }

    pub fn render_csv(&self) -> Result<String> {
        let header = ["team", "velocity_pts_per_h", "time_to_threshold_h", "points_in_first_window", "avg_pts_per_solve"]
            .map(String::from)
            .to_vec();
        let body = self.rows.iter().map(|r| {
            vec![
                r.team.clone(),
                r.velocity.map_or(String::new(), num),
                r.time_to_threshold.map_or(String::new(), num),
                num(r.points_in_first_window),
                r.avg_points_per_solve.map_or(String::new(), num),
            ]
        });
        csv_string(std::iter::once(header).chain(body))
    }
}

/// Score and percentile series for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    /// `(team, t, score)` for every recorded point.
    pub scores: Vec<(String, f64, f64)>,
    /// `(team, t, percentile)` at every distinct recorded time.
    pub percentiles: Vec<(String, f64, f64)>,
}

impl PlotData {
    pub fn build(all: &[LeaderboardSeries], field_size: Option<usize>) -> Result<Self> {
        let scores = all
            .iter()
            .flat_map(|s| s.points().iter().map(|p| (s.team().to_owned(), p.t, p.score)))
            .collect();
        let mut times: Vec<f64> = all.iter().flat_map(|s| s.points().iter().map(|p| p.t)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut percentiles = Vec::new();
        for t in times {
            for entry in rank_trajectory(all, t, field_size)? {
                percentiles.push((entry.team, t, entry.percentile));
            }
        }
        Ok(Self { scores, percentiles })
    }

    pub fn scores_csv(&self) -> Result<String> {
        let header = ["team", "t_hours", "score"].map(String::from).to_vec();
        let body = self.scores.iter().map(|(team, t, s)| vec![team.clone(), num(*t), num(*s)]);
        csv_string(std::iter::once(header).chain(body))
    }

    pub fn percentiles_csv(&self) -> Result<String> {
        let header = ["team", "t_hours", "percentile"].map(String::from).to_vec();
        let body = self.percentiles.iter().map(|(team, t, p)| vec![team.clone(), num(*t), num(*p)]);
        csv_string(std::iter::once(header).chain(body))
    }
}
