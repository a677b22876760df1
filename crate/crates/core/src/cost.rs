//! Pricing, closed-form cost projection and metered session cost.
//!
//! Money is exact: prices are integer micro-dollars per million tokens,
//! rates are rationals, and rounding happens only when a value is presented.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::entropy::{InferenceRecord, Role};
use crate::error::{Error, Result};
use crate::routing::RouteDecision;

pub const TOKENS_PER_MILLION: u64 = 1_000_000;
pub const MICROS_PER_DOLLAR: i64 = 1_000_000;

/// Whole micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Micros(pub i64);

impl Micros {
    pub fn from_dollars(dollars: f64) -> Self {
        Micros((dollars * MICROS_PER_DOLLAR as f64).round() as i64)
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / MICROS_PER_DOLLAR as f64
    }

    /// `$1,234.57`-style rendering, rounded half-up to `decimals` places.
    pub fn format_usd(self, decimals: u32) -> String {
        format_usd(&BigRational::from_integer(self.0.into()), decimals)
    }
}

/// Renders an exact micro-dollar amount as dollars with thousands separators.
pub fn format_usd(micros: &BigRational, decimals: u32) -> String {
    let scale = BigInt::from(10u32).pow(decimals);
    let scaled = micros * BigRational::from_integer(scale.clone())
        / BigRational::from_integer(MICROS_PER_DOLLAR.into());
    let negative = scaled < BigRational::zero();
    let rounded = round_half_up(&if negative { -scaled } else { scaled });
    let whole = &rounded / &scale;
    let frac = &rounded % &scale;
    let mut digits = whole.to_string();
    let mut grouped = String::new();
    while digits.len() > 3 {
        let tail = digits.split_off(digits.len() - 3);
        grouped = format!(",{tail}{grouped}");
    }
    grouped = format!("{digits}{grouped}");
    let sign = if negative { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}${grouped}")
    } else {
        format!("{sign}${grouped}.{:0>width$}", frac.to_string(), width = decimals as usize)
    }
}

fn round_half_up(x: &BigRational) -> BigInt {
    (x + BigRational::new(BigInt::one(), BigInt::from(2))).floor().to_integer()
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::domain(format!("not a decimal number: `{s}`"));
    let t = s.trim().trim_start_matches('$');
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let value = BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32));
    Ok(if neg { -value } else { value })
}

/// Price per million tokens, held as exact micro-dollars per million.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rate(BigRational);

impl Rate {
    /// Rate implied by the published cost table: $5.94 per million tokens.
    pub fn table() -> Self {
        Rate::from_micros_per_million(5_940_000)
    }

    pub fn from_micros_per_million(micros: i64) -> Self {
        Rate(BigRational::from_integer(micros.into()))
    }

    /// Parses a decimal dollar amount such as `5.94` exactly.
    pub fn parse_dollars(s: &str) -> Result<Self> {
        let dollars = parse_decimal(s)?;
        if dollars < BigRational::zero() {
            return Err(Error::domain(format!("rate must be >= 0, got {s}")));
        }
        Ok(Rate(dollars * BigRational::from_integer(MICROS_PER_DOLLAR.into())))
    }

    pub fn from_exact(micros_per_million: BigRational) -> Self {
        Rate(micros_per_million)
    }

    pub fn micros_per_million(&self) -> &BigRational {
        &self.0
    }

    pub fn dollars_per_million(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN) / MICROS_PER_DOLLAR as f64
    }
}

impl fmt::Display for Rate {
    /// Four decimals with trailing zeros trimmed down to cents: `$5.94/M`, `$5.1776/M`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format_usd(&self.0, 4);
        let trimmed = s.trim_end_matches('0');
        let cents = trimmed.len().max(s.len() - 2);
        write!(f, "{}/M", &s[..cents])
    }
}

/// Input/output prices of one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingModel {
    pub model_id: String,
    pub input_price_per_million: Micros,
    pub output_price_per_million: Micros,
}

impl PricingModel {
    pub fn new(model_id: impl Into<String>, input: Micros, output: Micros) -> Result<Self> {
        if input.0 < 0 || output.0 < 0 {
            return Err(Error::domain("prices must be >= 0"));
        }
        Ok(Self {
            model_id: model_id.into(),
            input_price_per_million: input,
            output_price_per_million: output,
        })
    }

    /// A model whose tokens cost nothing (flat-rate base model).
    pub fn free(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            input_price_per_million: Micros(0),
            output_price_per_million: Micros(0),
        }
    }

    /// $5 / $25 per million input/output tokens.
    pub fn premium_support(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            input_price_per_million: Micros(5_000_000),
            output_price_per_million: Micros(25_000_000),
        }
    }

    /// Exact cost of one call in micro-dollars.
    pub fn call_cost(&self, input_tokens: u64, output_tokens: u64) -> BigRational {
        let pico = BigInt::from(input_tokens) * self.input_price_per_million.0
            + BigInt::from(output_tokens) * self.output_price_per_million.0;
        BigRational::new(pico, BigInt::from(TOKENS_PER_MILLION))
    }
}

/// Mean tokens per inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenProfile {
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
}

impl TokenProfile {
    pub const REFERENCE: TokenProfile = TokenProfile {
        mean_input_tokens: 13_953.0,
        mean_output_tokens: 125.0,
    };

    pub fn new(mean_input_tokens: f64, mean_output_tokens: f64) -> Result<Self> {
        if !(mean_input_tokens > 0.0 && mean_input_tokens.is_finite())
            || !(mean_output_tokens > 0.0 && mean_output_tokens.is_finite())
        {
            return Err(Error::domain(format!(
                "token profile means must be positive, got {mean_input_tokens}/{mean_output_tokens}"
            )));
        }
        Ok(Self {
            mean_input_tokens,
            mean_output_tokens,
        })
    }
}

/// Token-share-weighted price per million tokens.
pub fn blended_rate(pricing: &PricingModel, profile: &TokenProfile) -> Result<Rate> {
    let to_ratio = |x: f64| {
        BigRational::from_float(x).ok_or_else(|| Error::domain(format!("non-finite token mean {x}")))
    };
    let input = to_ratio(profile.mean_input_tokens)?;
    let output = to_ratio(profile.mean_output_tokens)?;
    let total = &input + &output;
    if total <= BigRational::zero() {
        return Err(Error::domain("token profile has zero total tokens"));
    }
    let p_in = BigRational::from_integer(pricing.input_price_per_million.0.into());
    let p_out = BigRational::from_integer(pricing.output_price_per_million.0.into());
    Ok(Rate((input * p_in + output * p_out) / total))
}

/// Share of traffic routed to the support model for hold length `k`.
pub fn support_fraction(k: u32) -> Result<BigRational> {
    if !(1..=100).contains(&k) {
        return Err(Error::domain(format!("k must lie in 1..=100, got {k}")));
    }
    Ok(BigRational::new(k.into(), 100.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub total_tokens: u64,
    pub support_fraction: BigRational,
    pub blended_rate_per_million: Rate,
    /// Exact cost in micro-dollars.
    pub exact_cost: BigRational,
    /// `exact_cost` rounded half-up to whole micro-dollars.
    pub total_cost: Micros,
}

impl CostReport {
    pub(crate) fn from_parts(total_tokens: u64, support_fraction: BigRational, rate: Rate, exact_cost: BigRational) -> Self {
        let total_cost = Micros(round_half_up(&exact_cost).to_i64().expect("cost fits in i64 micros"));
        Self {
            total_tokens,
            support_fraction,
            blended_rate_per_million: rate,
            exact_cost,
            total_cost,
        }
    }

    pub fn reduction_vs_unsupported(&self) -> BigRational {
        BigRational::one() - &self.support_fraction
    }

    pub fn support_fraction_f64(&self) -> f64 {
        self.support_fraction.to_f64().unwrap_or(f64::NAN)
    }

    pub fn format_cost(&self, decimals: u32) -> String {
        format_usd(&self.exact_cost, decimals)
    }
}

/// Closed-form projection: `tokens / 1e6 × fraction × rate`, with the
/// support fraction `k / 100`, or 1 when `k` is `None` (no base model).
pub fn project_cost(total_tokens: i64, k: Option<u32>, rate: &Rate) -> Result<CostReport> {
    let fraction = match k {
        None => BigRational::one(),
        Some(k) => support_fraction(k)?,
    };
    project_cost_at_fraction(total_tokens, fraction, rate)
}

/// [`project_cost`] with an explicit support fraction in `[0, 1]`.
pub fn project_cost_at_fraction(total_tokens: i64, fraction: BigRational, rate: &Rate) -> Result<CostReport> {
    if total_tokens < 0 {
        return Err(Error::domain(format!("token volume must be >= 0, got {total_tokens}")));
    }
    if fraction < BigRational::zero() || fraction > BigRational::one() {
        return Err(Error::domain(format!("support fraction must lie in [0, 1], got {fraction}")));
    }
    let exact = BigRational::new(total_tokens.into(), BigInt::from(TOKENS_PER_MILLION))
        * &fraction
        * rate.micros_per_million();
    Ok(CostReport::from_parts(total_tokens as u64, fraction, rate.clone(), exact))
}

/// Prices keyed by model id.
#[derive(Debug, Clone, Default)]
pub struct PriceBook {
    models: HashMap<String, PricingModel>,
}

impl PriceBook {
    pub fn new(models: impl IntoIterator<Item = PricingModel>) -> Self {
        Self {
            models: models.into_iter().map(|m| (m.model_id.clone(), m)).collect(),
        }
    }

    pub fn get(&self, model_id: &str) -> Result<&PricingModel> {
        self.models
            .get(model_id)
            .ok_or_else(|| Error::domain(format!("no pricing for model `{model_id}`")))
    }

    pub fn call_cost(&self, model_id: &str, record: &InferenceRecord) -> Result<BigRational> {
        Ok(self.get(model_id)?.call_cost(record.input_tokens, record.output_tokens))
    }
}

/// Metered cost of a routed session using each record's actual token counts.
///
/// The reported rate is the effective one that satisfies
/// `cost = tokens / 1e6 × support_fraction × rate`; it is zero when no
/// support inference ran.
pub fn session_cost(decisions: &[RouteDecision], records: &[InferenceRecord], prices: &PriceBook) -> Result<CostReport> {
    if decisions.len() != records.len() {
        return Err(Error::Alignment {
            decisions: decisions.len(),
            records: records.len(),
        });
    }
    let mut exact = BigRational::zero();
    let mut total_tokens = 0u64;
    let mut support = 0u64;
    for (decision, record) in decisions.iter().zip(records) {
        exact += prices.call_cost(&decision.model_id, record)?;
        total_tokens += record.input_tokens + record.output_tokens;
        if decision.role == Role::Support {
            support += 1;
        }
    }
    let fraction = if decisions.is_empty() {
        BigRational::zero()
    } else {
        BigRational::new(support.into(), (decisions.len() as u64).into())
    };
    let volume = BigRational::new(total_tokens.into(), BigInt::from(TOKENS_PER_MILLION)) * &fraction;
    let rate = if volume.is_zero() {
        Rate(BigRational::zero())
    } else {
        Rate(&exact / volume)
    };
    Ok(CostReport::from_parts(total_tokens, fraction, rate, exact))
}

/// Token volumes of the standard cost table.
pub const TABLE_VOLUMES: [u64; 4] = [1_000_000, 10_000_000, 100_000_000, 1_000_000_000];
pub const TABLE_KS: [u32; 4] = [20, 10, 5, 2];

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub k: Option<u32>,
    pub cells: Vec<CostReport>,
}

/// Cost projections for each hold length over a set of token volumes, with
/// an unsupported row first.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub rate: Rate,
    pub volumes: Vec<u64>,
    pub rows: Vec<CostRow>,
}

impl CostTable {
    pub fn build(rate: &Rate, volumes: &[u64], ks: &[u32]) -> Result<Self> {
        let row = |k: Option<u32>| -> Result<CostRow> {
            let cells = volumes
                .iter()
                .map(|v| project_cost(*v as i64, k, rate))
                .collect::<Result<Vec<_>>>()?;
            Ok(CostRow { k, cells })
        };
        let mut rows = vec![row(None)?];
        for k in ks {
            rows.push(row(Some(*k))?);
        }
        Ok(Self {
            rate: rate.clone(),
            volumes: volumes.to_vec(),
            rows,
        })
    }

    /// Volumes below 100M print in cents, larger ones in whole dollars.
    pub fn cell_decimals(volume: u64) -> u32 {
        if volume < 100_000_000 {
            2
        } else {
            0
        }
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["Configuration".to_owned(), "k".to_owned()];
        h.extend(self.volumes.iter().map(|v| volume_label(*v)));
        h.push("Reduction".to_owned());
        h
    }

    fn body(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                let mut cells = vec![
                    match row.k {
                        None => "without support".to_owned(),
                        Some(_) => "with support".to_owned(),
                    },
                    row.k.map_or("---".to_owned(), |k| k.to_string()),
                ];
                for (v, c) in self.volumes.iter().zip(&row.cells) {
                    cells.push(c.format_cost(Self::cell_decimals(*v)));
                }
                cells.push(match row.k {
                    None => "---".to_owned(),
                    Some(_) => format_percent(&row.cells[0].reduction_vs_unsupported()),
                });
                cells
            })
            .collect()
    }

    /// Aligned text: first column left-aligned, the rest right-aligned.
    pub fn render_text(&self) -> String {
        let mut rows = vec![self.header()];
        rows.extend(self.body());
        crate::table::align_columns(&rows)
    }

    /// One CSV row per cell: `k,tokens,support_fraction,cost_micros,cost_display,reduction`.
    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::domain(format!("csv: {e}"));
        w.write_record(["k", "tokens", "support_fraction", "cost_micros", "cost", "reduction"])
            .map_err(io)?;
        for row in &self.rows {
            for (v, c) in self.volumes.iter().zip(&row.cells) {
                w.write_record([
                    row.k.map_or(String::new(), |k| k.to_string()),
                    v.to_string(),
                    c.support_fraction_f64().to_string(),
                    c.total_cost.0.to_string(),
                    c.format_cost(Self::cell_decimals(*v)),
                    format_percent(&c.reduction_vs_unsupported()),
                ])
                .map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn volume_label(v: u64) -> String {
    match v {
        v if v >= 1_000_000_000 && v % 1_000_000_000 == 0 => format!("{}B", v / 1_000_000_000),
        v if v >= 1_000_000 && v % 1_000_000 == 0 => format!("{}M", v / 1_000_000),
        v if v >= 1_000 && v % 1_000 == 0 => format!("{}K", v / 1_000),
        v => v.to_string(),
    }
}

fn format_percent(x: &BigRational) -> String {
    let pct = x * BigRational::from_integer(100.into());
    format!("{}%", round_half_up(&pct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::Reason;

    fn dollars(s: &str) -> Rate {
        Rate::parse_dollars(s).unwrap()
    }

    #[test]
    fn equal_prices_blend_to_themselves() {
        let p = PricingModel::new("m", Micros(6_000_000), Micros(6_000_000)).unwrap();
        for profile in [TokenProfile::REFERENCE, TokenProfile::new(3.5, 900.0).unwrap()] {
            assert_eq!(blended_rate(&p, &profile).unwrap(), Rate::from_micros_per_million(6_000_000));
        }
    }

    #[test]
    fn reference_profile_blend() {
        // 5 × 13953/14078 + 25 × 125/14078 = 72890/14078
        let r = blended_rate(&PricingModel::premium_support("opus"), &TokenProfile::REFERENCE).unwrap();
        assert_eq!(
            r.micros_per_million(),
            &BigRational::new(BigInt::from(72_890_000_000i64), BigInt::from(14_078))
        );
        assert!((r.dollars_per_million() - 5.1776).abs() < 1e-4);
        assert_eq!(r.to_string(), "$5.1776/M");
    }

    #[test]
    fn midpoint_blend() {
        let r = blended_rate(&PricingModel::premium_support("opus"), &TokenProfile::new(50.0, 50.0).unwrap()).unwrap();
        assert_eq!(r, dollars("15"));
    }

    #[test]
    fn invalid_profile() {
        assert!(TokenProfile::new(0.0, 1.0).is_err());
        assert!(TokenProfile::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn support_fraction_law() {
        assert_eq!(support_fraction(2).unwrap(), BigRational::new(2.into(), 100.into()));
        assert_eq!(support_fraction(20).unwrap(), BigRational::new(1.into(), 5.into()));
        assert_eq!(support_fraction(100).unwrap(), BigRational::one());
        assert!(support_fraction(0).is_err());
        assert!(support_fraction(101).is_err());
    }

    #[test]
    fn projections() {
        let r = Rate::table();
        let none = project_cost(1_000_000_000, None, &r).unwrap();
        assert_eq!(none.total_cost, Micros(5_940_000_000));
        assert_eq!(none.format_cost(0), "$5,940");
        let k2 = project_cost(1_000_000_000, Some(2), &r).unwrap();
        assert_eq!(k2.total_cost, Micros(118_800_000));
        assert_eq!(k2.format_cost(2), "$118.80");
        assert_eq!(k2.format_cost(0), "$119");
        assert_eq!(project_cost(0, Some(5), &r).unwrap().total_cost, Micros(0));
        assert!(project_cost(-1, None, &r).is_err());
    }

    #[test]
    fn rate_display_and_parse() {
        assert_eq!(Rate::table().to_string(), "$5.94/M");
        assert_eq!(dollars("6").to_string(), "$6.00/M");
        assert_eq!(dollars("$5.94"), Rate::table());
        assert!(Rate::parse_dollars("abc").is_err());
        assert!(Rate::parse_dollars("-1").is_err());
        assert!(Rate::parse_dollars(".").is_err());
    }

    #[test]
    fn usd_formatting_rounds_half_up() {
        assert_eq!(Micros(297_000).format_usd(2), "$0.30");
        assert_eq!(Micros(29_500_000).format_usd(0), "$30");
        assert_eq!(Micros(1_234_567_890).format_usd(2), "$1,234.57");
        assert_eq!(Micros(0).format_usd(2), "$0.00");
        assert_eq!(Micros(-1_500_000).format_usd(0), "-$2");
    }

    fn decision(model: &str, role: Role) -> RouteDecision {
        RouteDecision {
            model_id: model.to_owned(),
            role,
            reason: Reason::Holding,
        }
    }

    fn profile_record(step: u64) -> InferenceRecord {
        InferenceRecord {
            sequence_id: step,
            role: Role::Base,
            input_tokens: 13_953,
            output_tokens: 125,
            token_logprobs: vec![],
            task_confidence: None,
        }
    }

    fn book() -> PriceBook {
        PriceBook::new([PricingModel::free("alias"), PricingModel::premium_support("opus")])
    }

    #[test]
    fn metered_costs() {
        let all_base: Vec<_> = (0..5).map(|_| decision("alias", Role::Base)).collect();
        let recs: Vec<_> = (1..=5).map(profile_record).collect();
        assert_eq!(session_cost(&all_base, &recs, &book()).unwrap().total_cost, Micros(0));

        // 13953 × 5 + 125 × 25 micro-dollars
        let one = session_cost(&[decision("opus", Role::Support)], &[profile_record(1)], &book()).unwrap();
        assert_eq!(one.total_cost, Micros(72_890));
        assert_eq!(one.format_cost(4), "$0.0729");

        assert!(matches!(
            session_cost(&all_base, &recs[..4], &book()),
            Err(Error::Alignment { decisions: 5, records: 4 })
        ));
        assert!(session_cost(&[decision("gpt", Role::Support)], &recs[..1], &book()).is_err());
    }

    #[test]
    fn two_percent_of_all_support() {
        let recs: Vec<_> = (1..=100).map(profile_record).collect();
        let routed: Vec<_> = (0..100)
            .map(|i| if i == 50 || i == 51 { decision("opus", Role::Support) } else { decision("alias", Role::Base) })
            .collect();
        let all_support: Vec<_> = (0..100).map(|_| decision("opus", Role::Support)).collect();
        let routed = session_cost(&routed, &recs, &book()).unwrap();
        let full = session_cost(&all_support, &recs, &book()).unwrap();
        assert_eq!(routed.exact_cost * BigRational::from_integer(50.into()), full.exact_cost);
    }

    #[test]
    fn metered_matches_closed_form_on_profile_sessions() {
        let recs: Vec<_> = (1..=50).map(profile_record).collect();
        let decisions: Vec<_> = (0..50)
            .map(|i| if i % 10 < 3 { decision("opus", Role::Support) } else { decision("alias", Role::Base) })
            .collect();
        let metered = session_cost(&decisions, &recs, &book()).unwrap();
        let rate = blended_rate(&PricingModel::premium_support("opus"), &TokenProfile::REFERENCE).unwrap();
        let closed = BigRational::new(metered.total_tokens.into(), BigInt::from(TOKENS_PER_MILLION))
            * &metered.support_fraction
            * rate.micros_per_million();
        assert_eq!(closed, metered.exact_cost);
        assert_eq!(metered.blended_rate_per_million, rate);
    }
}
