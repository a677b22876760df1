//! Leaderboard time series and velocity metrics.
//!
//! Scores are interpolated piecewise-linearly between recorded points. Before
//! a team's first point its score is 0, so a late entrant's series simply
//! starts at its entry time. Where several points share a time, the last one
//! wins.

mod report;

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use report::{
    format_thousands, GrowthRow, GrowthTable, PlotData, ThresholdRow, ThresholdTable, VelocityReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardSeries {
    team: String,
    points: Vec<SeriesPoint>,
    solves: Option<u64>,
}

impl LeaderboardSeries {
    pub fn new(team: impl Into<String>, points: Vec<SeriesPoint>, solves: Option<u64>) -> Result<Self> {
        let team = team.into();
        if points.is_empty() {
            return Err(Error::EmptySequence("leaderboard series"));
        }
        for (i, p) in points.iter().enumerate() {
            check_point(p, i.checked_sub(1).map(|j| &points[j])).map_err(|reason| {
                Error::domain(format!("{team}: point {}: {reason}", i + 1))
            })?;
        }
        Ok(Self { team, points, solves })
    }

    pub fn team(&self) -> &str {
        &self.team
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }

    pub fn solves(&self) -> Option<u64> {
        self.solves
    }

    pub fn start(&self) -> f64 {
        self.points[0].t
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    pub fn final_score(&self) -> f64 {
        self.points[self.points.len() - 1].score
    }

    /// Interpolated score at `t`. Times before 0 or after the last point are
    /// out of range.
    pub fn score_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.end()) {
            return Err(Error::OutOfRange {
                t,
                start: 0.0,
                end: self.end(),
            });
        }
        Ok(self.interpolate(t))
    }

    /// Like [`score_at`](Self::score_at) but holds the final score after the
    /// series ends.
    pub fn score_at_or_final(&self, t: f64) -> Result<f64> {
        if t > self.end() {
            return Ok(self.final_score());
        }
        self.score_at(t)
    }

    fn interpolate(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|p| p.t <= t);
        if i == 0 {
            return 0.0;
        }
        let a = self.points[i - 1];
        if a.t == t || i == self.points.len() {
            return a.score;
        }
        let b = self.points[i];
        a.score + (b.score - a.score) * (t - a.t) / (b.t - a.t)
    }
}

fn check_point(p: &SeriesPoint, prev: Option<&SeriesPoint>) -> std::result::Result<(), String> {
    if !(p.t.is_finite() && p.t >= 0.0) {
        return Err(format!("t must be finite and >= 0, got {}", p.t));
    }
    if !(p.score.is_finite() && p.score >= 0.0) {
        return Err(format!("score must be finite and >= 0, got {}", p.score));
    }
    if let Some(q) = prev {
        if p.t < q.t {
            return Err(format!("time goes backwards ({} after {})", p.t, q.t));
        }
        if p.score < q.score {
            return Err(format!("score drops ({} after {})", p.score, q.score));
        }
    }
    Ok(())
}

/// Reads `team,t_hours,score[,solves]` rows with a header. Lines starting
/// with `#` are ignored. Series keep first-appearance order; a team's solve
/// count is its last non-empty `solves` cell.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<LeaderboardSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let malformed = |line: usize, reason: String| Error::MalformedSeries { line, reason };
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (team_col, t_col, score_col) = match (col("team"), col("t_hours"), col("score")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(malformed(
                1,
                "header must name team, t_hours and score columns".into(),
            ))
        }
    };
    let solves_col = col("solves");

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<SeriesPoint>, Option<u64>)> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let team = field(team_col);
        if team.is_empty() {
            return Err(malformed(line, "empty team name".into()));
        }
        let num = |i: usize, name: &str| {
            field(i)
                .parse::<f64>()
                .map_err(|_| malformed(line, format!("{name} `{}` is not a number", field(i))))
        };
        let point = SeriesPoint {
            t: num(t_col, "t_hours")?,
            score: num(score_col, "score")?,
        };
        let solves = match solves_col.map(field) {
            Some(s) if !s.is_empty() => Some(
                s.parse::<u64>()
                    .map_err(|_| malformed(line, format!("solves `{s}` is not a count")))?,
            ),
            _ => None,
        };
        let entry = groups.entry(team.to_owned()).or_insert_with(|| {
            order.push(team.to_owned());
            (Vec::new(), None)
        });
        check_point(&point, entry.0.last()).map_err(|reason| malformed(line, format!("{team}: {reason}")))?;
        entry.0.push(point);
        if solves.is_some() {
            entry.1 = solves;
        }
    }
    if order.is_empty() {
        return Err(Error::EmptySequence("leaderboard file"));
    }
    order
        .into_iter()
        .map(|team| {
            let (points, solves) = groups.remove(&team).expect("grouped");
            LeaderboardSeries::new(team, points, solves)
        })
        .collect()
}

pub fn load_series(path: impl AsRef<Path>) -> Result<Vec<LeaderboardSeries>> {
    read_series_csv(std::fs::File::open(path)?)
}

pub fn find_team<'a>(all: &'a [LeaderboardSeries], team: &str) -> Result<&'a LeaderboardSeries> {
    all.iter()
        .find(|s| s.team == team)
        .ok_or_else(|| Error::domain(format!("no series for team `{team}`")))
}

/// Mean score gain per hour over `[t0, t1]`.
pub fn window_velocity(series: &LeaderboardSeries, t0: f64, t1: f64) -> Result<f64> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::domain(format!("window needs t1 > t0, got [{t0}, {t1}]")));
    }
    Ok((series.score_at(t1)? - series.score_at(t0)?) / (t1 - t0))
}

/// Velocity over `[0, split]` divided by velocity over `[split, end]`;
/// `f64::INFINITY` when the late velocity is 0.
pub fn early_late_ratio(series: &LeaderboardSeries, split: f64, end: f64) -> Result<f64> {
    let early = window_velocity(series, 0.0, split)?;
    let late = window_velocity(series, split, end)?;
    Ok(if late == 0.0 { f64::INFINITY } else { early / late })
}

/// Time of the first crossing of `threshold`, interpolated between the
/// bracketing points.
pub fn time_to_threshold(series: &LeaderboardSeries, threshold: f64) -> Result<f64> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::domain(format!("threshold must be > 0, got {threshold}")));
    }
    let pts = series.points();
    let i = pts
        .iter()
        .position(|p| p.score >= threshold)
        .ok_or(Error::NotReached {
            threshold,
            final_score: series.final_score(),
        })?;
    if i == 0 {
        return Ok(pts[0].t);
    }
    let (a, b) = (pts[i - 1], pts[i]);
    Ok(a.t + (threshold - a.score) / (b.score - a.score) * (b.t - a.t))
}

/// `threshold / time_to_threshold`; `f64::INFINITY` for a crossing at t = 0.
pub fn velocity_to_threshold(series: &LeaderboardSeries, threshold: f64) -> Result<f64> {
    let t = time_to_threshold(series, threshold)?;
    Ok(if t == 0.0 { f64::INFINITY } else { threshold / t })
}

/// Count per hour, used both for solves and for points.
pub fn solve_rate(count: f64, window_hours: f64) -> Result<f64> {
    if !(window_hours.is_finite() && window_hours > 0.0) {
        return Err(Error::domain(format!("window must be > 0 hours, got {window_hours}")));
    }
    if !(count.is_finite() && count >= 0.0) {
        return Err(Error::domain(format!("count must be >= 0, got {count}")));
    }
    Ok(count / window_hours)
}

/// Final score over solve count, when the count is known and nonzero.
pub fn avg_points_per_solve(series: &LeaderboardSeries) -> Option<f64> {
    match series.solves {
        Some(n) if n > 0 => Some(series.final_score() / n as f64),
        _ => None,
    }
}

/// Final score of `leader` minus the best final score among the others.
pub fn lead_margin(all: &[LeaderboardSeries], leader: &str) -> Result<f64> {
    let lead = find_team(all, leader)?;
    let runner_up = all
        .iter()
        .filter(|s| s.team != leader)
        .map(|s| s.final_score())
        .fold(f64::NEG_INFINITY, f64::max);
    if runner_up == f64::NEG_INFINITY {
        return Err(Error::domain("margin needs at least two teams"));
    }
    Ok(lead.final_score() - runner_up)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub team: String,
    pub score: f64,
    /// Dense rank, 1 for the top score.
    pub rank: usize,
    /// Teams in the field with a strictly lower score.
    pub outperformed: usize,
    /// `outperformed / field_size`, in `[0, 1]`.
    pub percentile: f64,
}

/// Ranks every series by its score at `t` (the final score is held after a
/// series ends). `field_size` declares the full field when `all` is a sample
/// of the top teams; every team outside the sample is assumed to be below it.
pub fn rank_trajectory(all: &[LeaderboardSeries], t: f64, field_size: Option<usize>) -> Result<Vec<RankEntry>> {
    if all.is_empty() {
        return Err(Error::EmptySequence("leaderboard series"));
    }
    let field = field_size.unwrap_or(all.len());
    if field < all.len() {
        return Err(Error::domain(format!(
            "field size {field} is smaller than the {} series supplied",
            all.len()
        )));
    }
    let scores: Vec<f64> = all.iter().map(|s| s.score_at_or_final(t)).collect::<Result<_>>()?;
    let mut distinct = scores.clone();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let mut out: Vec<RankEntry> = all
        .iter()
        .zip(&scores)
        .map(|(s, &score)| {
            let rank = distinct.iter().take_while(|&&d| d > score).count() + 1;
            let at_or_above = scores.iter().filter(|&&o| o >= score).count();
            let outperformed = field - at_or_above;
            RankEntry {
                team: s.team.clone(),
                score,
                rank,
                outperformed,
                percentile: outperformed as f64 / field as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.team.cmp(&b.team)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(f64, f64)]) -> LeaderboardSeries {
        LeaderboardSeries::new(
            "t",
            points.iter().map(|&(t, score)| SeriesPoint { t, score }).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn interpolation_rules() {
        let s = series(&[(2.0, 100.0), (4.0, 300.0), (4.0, 500.0), (6.0, 500.0)]);
        assert_eq!(s.score_at(0.0).unwrap(), 0.0);
        assert_eq!(s.score_at(1.99).unwrap(), 0.0);
        assert_eq!(s.score_at(2.0).unwrap(), 100.0);
        assert_eq!(s.score_at(3.0).unwrap(), 200.0);
        assert_eq!(s.score_at(4.0).unwrap(), 500.0);
        assert_eq!(s.score_at(6.0).unwrap(), 500.0);
        assert!(matches!(s.score_at(6.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(s.score_at(-1.0), Err(Error::OutOfRange { .. })));
        assert_eq!(s.score_at_or_final(100.0).unwrap(), 500.0);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(LeaderboardSeries::new("x", vec![], None).is_err());
        let pts = |v: &[(f64, f64)]| v.iter().map(|&(t, score)| SeriesPoint { t, score }).collect();
        assert!(LeaderboardSeries::new("x", pts(&[(1.0, 5.0), (0.5, 6.0)]), None).is_err());
        assert!(LeaderboardSeries::new("x", pts(&[(1.0, 5.0), (2.0, 4.0)]), None).is_err());
        assert!(LeaderboardSeries::new("x", pts(&[(-1.0, 5.0)]), None).is_err());
    }

    #[test]
    fn velocities() {
        let s = series(&[(0.0, 0.0), (7.0, 11_700.0), (48.0, 18_900.0)]);
        assert!((window_velocity(&s, 0.0, 7.0).unwrap() - 11_700.0 / 7.0).abs() < 1e-9);
        assert!(window_velocity(&s, 7.0, 7.0).is_err());
        assert!(matches!(window_velocity(&s, 0.0, 49.0), Err(Error::OutOfRange { .. })));
        let flat = series(&[(0.0, 10.0), (5.0, 10.0)]);
        assert_eq!(window_velocity(&flat, 1.0, 5.0).unwrap(), 0.0);
        assert_eq!(early_late_ratio(&series(&[(0.0, 0.0), (2.0, 2.0), (4.0, 2.0)]), 2.0, 4.0).unwrap(), f64::INFINITY);
        assert_eq!(early_late_ratio(&series(&[(0.0, 0.0), (4.0, 4.0)]), 2.0, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn threshold_crossing() {
        let s = series(&[(0.0, 0.0), (1.0, 9_692.0), (1.07, 10_517.0)]);
        let t = time_to_threshold(&s, 10_000.0).unwrap();
        assert!((t - (1.0 + 0.07 * 308.0 / 825.0)).abs() < 1e-12);
        assert!(matches!(time_to_threshold(&s, 20_000.0), Err(Error::NotReached { .. })));
        let instant = series(&[(0.0, 500.0), (1.0, 600.0)]);
        assert_eq!(velocity_to_threshold(&instant, 500.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ranking_and_percentiles() {
        let a = series(&[(0.0, 0.0), (1.0, 30.0)]);
        let mut b = series(&[(0.0, 0.0), (1.0, 20.0)]);
        b.team = "b".into();
        let r = rank_trajectory(&[a.clone()], 1.0, None).unwrap();
        assert_eq!(r[0].percentile, 0.0);
        let r = rank_trajectory(&[a, b], 1.0, Some(10)).unwrap();
        assert_eq!((r[0].rank, r[0].outperformed), (1, 9));
        assert_eq!((r[1].rank, r[1].outperformed), (2, 8));
    }

    #[test]
    fn solve_rates() {
        assert!((solve_rate(44.0, 8.5).unwrap() - 5.176_470_588).abs() < 1e-8);
        assert_eq!(solve_rate(0.0, 3.0).unwrap(), 0.0);
        assert!(solve_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn csv_ingestion_checks_order() {
        let ok = "team,t_hours,score\n# note\na,0,0\nb,0,5\na,1,10\n";
        let all = read_series_csv(ok.as_bytes()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].points().len(), 2);
        let bad = "team,t_hours,score\na,1,0\na,0.5,10\n";
        assert!(matches!(read_series_csv(bad.as_bytes()), Err(Error::MalformedSeries { line: 3, .. })));
        let no_header = "who,when,what\na,1,0\n";
        assert!(matches!(read_series_csv(no_header.as_bytes()), Err(Error::MalformedSeries { line: 1, .. })));
    }
}
