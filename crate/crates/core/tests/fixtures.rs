use std::path::PathBuf;

use entropy_router::analytics::{
    self, early_late_ratio, find_team, lead_margin, load_series, rank_trajectory, solve_rate, time_to_threshold,
    velocity_to_threshold, window_velocity, GrowthTable, LeaderboardSeries, ThresholdTable,
};
use entropy_router::entropy::{avg_token_prob, perplexity};
use entropy_router::{trace, EntropyParams, EntropySignal, Error};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// (perplexity, mean token probability) read off the published plot.
const PLOT_PAIRS: [(f64, f64); 10] = [
    (1.14, 0.92),
    (1.12, 0.95),
    (1.11, 0.94),
    (1.12, 0.93),
    (1.11, 0.93),
    (1.09, 0.95),
    (1.21, 0.91),
    (1.52, 0.78),
    (1.40, 0.81),
    (1.29, 0.87),
];

#[test]
fn trace_reproduces_plotted_pairs() {
    let records = trace::load_trace(fixture("entropy_trace.jsonl")).unwrap();
    assert_eq!(records.len(), 10);
    for (rec, (ppl, p)) in records.iter().zip(PLOT_PAIRS) {
        let got_ppl = perplexity(rec).unwrap();
        let got_p = avg_token_prob(rec).unwrap();
        assert!((got_ppl - ppl).abs() <= 0.005, "step {}: perplexity {got_ppl} vs {ppl}", rec.sequence_id);
        assert!((got_p - p).abs() <= 0.005, "step {}: mean prob {got_p} vs {p}", rec.sequence_id);
        assert_eq!((rec.input_tokens, rec.output_tokens), (13_953, 125));
    }
}

#[test]
fn trace_global_means_and_argmax() {
    let records = trace::load_trace(fixture("entropy_trace.jsonl")).unwrap();
    let n = records.len() as f64;
    let mean_ppl = records.iter().map(|r| perplexity(r).unwrap()).sum::<f64>() / n;
    let mean_p = records.iter().map(|r| avg_token_prob(r).unwrap()).sum::<f64>() / n;
    assert!((mean_ppl - 1.21).abs() <= 0.01, "{mean_ppl}");
    assert!((mean_p - 0.9017).abs() <= 0.01, "{mean_p}");

    let params = EntropyParams::default();
    let signals: Vec<EntropySignal> = records
        .iter()
        .map(|r| EntropySignal::from_record(r, &params).unwrap())
        .collect();
    let argmax = signals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.e_combined.total_cmp(&b.1.e_combined))
        .map(|(i, _)| i + 1)
        .unwrap();
    assert_eq!(argmax, 8);
    // ln(1.52) / ln(131072), computed independently
    let oracle = 1.52f64.ln() / (17.0 * 2f64.ln());
    assert!((signals[7].h_p - oracle).abs() < 1e-5);
    assert!((signals[7].h_p - 0.03554).abs() < 1e-5);
}

#[test]
fn trace_file_round_trips_byte_for_byte() {
    let bytes = std::fs::read(fixture("entropy_trace.jsonl")).unwrap();
    let records = trace::read_trace(&bytes[..]).unwrap();
    let mut out = Vec::new();
    trace::write_trace(&mut out, &records).unwrap();
    assert_eq!(out, bytes);
}

fn dragos() -> Vec<LeaderboardSeries> {
    load_series(fixture("dragos.csv")).unwrap()
}

fn within(got: f64, printed: f64, unit: f64) -> bool {
    (got - printed).abs() <= unit + 1e-9
}

/// team, 1h, 7h, 24h, 48h, pts/h 0-7, pts/h 7-48, early/late
const GROWTH: [(&str, [f64; 4], f64, f64, f64); 6] = [
    ("CAI", [2100.0, 11_700.0, 18_900.0, 18_900.0], 1671.0, 176.0, 9.5),
    ("Gr1dGuardi4ns", [2100.0, 8700.0, 18_900.0, 19_900.0], 1243.0, 273.0, 4.6),
    ("hxteam", [1300.0, 8100.0, 11_500.0, 19_900.0], 1157.0, 288.0, 4.0),
    ("OTóż.to", [2900.0, 8700.0, 14_700.0, 19_900.0], 1243.0, 273.0, 4.6),
    ("Adamastor", [2900.0, 10_900.0, 16_300.0, 18_900.0], 1557.0, 195.0, 8.0),
    ("TugaPwners", [2100.0, 10_900.0, 12_900.0, 18_900.0], 1557.0, 195.0, 8.0),
];

#[test]
fn growth_table_per_team_cells() {
    let all = dragos();
    for (team, snaps, early, late, ratio) in GROWTH {
        let s = find_team(&all, team).unwrap();
        for (h, want) in [1.0, 7.0, 24.0, 48.0].into_iter().zip(snaps) {
            assert_eq!(s.score_at(h).unwrap(), want, "{team} at {h}h");
        }
        let e = window_velocity(s, 0.0, 7.0).unwrap();
        let l = window_velocity(s, 7.0, 48.0).unwrap();
        let r = early_late_ratio(s, 7.0, 48.0).unwrap();
        assert!(within(e, early, 1.0), "{team} early {e}");
        assert!(within(l, late, 1.0), "{team} late {l}");
        assert!(within(r, ratio, 0.1), "{team} ratio {r}");
    }
    let table = GrowthTable::build(&all, &[1.0, 7.0, 24.0, 48.0], 7.0, 48.0).unwrap();
    let text = table.render_text();
    assert!(text.lines().any(|l| l.starts_with("CAI") && l.contains("1,671") && l.contains("9.5x")), "{text}");
}

/// team, velocity, time to 10K, points in 1h, avg pts/solve
const VELOCITY: [(&str, f64, f64, f64, f64); 6] = [
    ("CAI", 1846.0, 5.42, 2100.0, 591.0),
    ("Gr1dGuardi4ns", 1338.0, 7.47, 2100.0, 603.0),
    ("Adamastor", 1789.0, 5.59, 2900.0, 591.0),
    ("TugaPwners", 1714.0, 5.84, 2100.0, 591.0),
    ("OTóż.to", 1402.0, 7.13, 2900.0, 603.0),
    ("hxteam", 491.0, 20.37, 1300.0, 603.0),
];

#[test]
fn threshold_table_per_team_cells() {
    let all = dragos();
    for (team, velocity, t10k, first_hour, per_solve) in VELOCITY {
        let s = find_team(&all, team).unwrap();
        let v = velocity_to_threshold(s, 10_000.0).unwrap();
        let t = time_to_threshold(s, 10_000.0).unwrap();
        assert!(within(v, velocity, 1.0), "{team} velocity {v}");
        assert!(within(t, t10k, 0.01), "{team} time {t}");
        assert_eq!(s.score_at(1.0).unwrap(), first_hour);
        let a = analytics::avg_points_per_solve(s).unwrap();
        assert!(within(a, per_solve, 1.0), "{team} per solve {a}");
    }
    let table = ThresholdTable::build(&all, 10_000.0, 1.0).unwrap();
    let text = table.render_text();
    assert!(text.contains("Time to 10K"));
    assert!(text.lines().any(|l| l.starts_with("CAI") && l.contains("1846") && l.contains("5.42h")), "{text}");
}

#[test]
fn neurogrid_scalars() {
    let all = load_series(fixture("neurogrid.csv")).unwrap();
    assert_eq!(lead_margin(&all, "CAI").unwrap(), 1925.0);
    let cai = find_team(&all, "CAI").unwrap();
    let pace = solve_rate(cai.final_score(), cai.end()).unwrap();
    assert_eq!(pace.round(), 787.0);
    let t = time_to_threshold(cai, 10_000.0).unwrap();
    assert!((t - (1.0 + 0.07 * 308.0 / 825.0)).abs() < 1e-9, "{t}");
    assert!((t * 60.0 - 62.0).abs() < 0.5);
    assert_eq!(cai.solves(), Some(41));

    let ranks = rank_trajectory(&all, cai.end(), Some(155)).unwrap();
    assert_eq!(ranks[0].team, "CAI");
    assert_eq!(format!("{:.1}", ranks[0].percentile * 100.0), "99.4");
}

#[test]
fn dragos_final_percentile() {
    let all = dragos();
    let ranks = rank_trajectory(&all, 48.0, Some(1200)).unwrap();
    let cai = ranks.iter().find(|r| r.team == "CAI").unwrap();
    assert_eq!(cai.outperformed, 1194);
    assert_eq!(format!("{:.1}", cai.percentile * 100.0), "99.5");
}

#[test]
fn uwsp_series_and_solve_rate() {
    assert_eq!(format!("{:.1}", solve_rate(44.0, 8.5).unwrap()), "5.2");
    let all = load_series(fixture("uwsp.csv")).unwrap();
    let cai = find_team(&all, "CAI").unwrap();
    assert_eq!(cai.final_score(), 11_500.0);
    // late entrant: nothing before the first recorded point
    assert_eq!(cai.score_at(cai.start() - 1.0).unwrap(), 0.0);

    let err = load_series(fixture("uwsp_unsorted.csv")).unwrap_err();
    assert!(matches!(err, Error::MalformedSeries { .. }), "{err}");
}
