use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use entropy_router::cost::{
    blended_rate, CostTable, Micros, PricingModel, Rate, TokenProfile, TABLE_KS, TABLE_VOLUMES,
};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args)]
pub struct CostArgs {
    /// `table` ($5.94/M), `profile` (blended from prices and token profile),
    /// or a dollar amount per million tokens.
    #[arg(long, default_value = "table")]
    rate: String,
    /// Token volumes, one column each.
    #[arg(long = "tokens", value_delimiter = ',')]
    tokens: Vec<u64>,
    /// Hold lengths, one row each.
    #[arg(long = "k", value_delimiter = ',')]
    ks: Vec<u32>,
    /// Support input price, dollars per million tokens (profile rate).
    #[arg(long, default_value = "5")]
    input_price: String,
    /// Support output price, dollars per million tokens (profile rate).
    #[arg(long, default_value = "25")]
    output_price: String,
    /// Mean input tokens per inference (profile rate).
    #[arg(long, default_value_t = TokenProfile::REFERENCE.mean_input_tokens)]
    mean_input: f64,
    /// Mean output tokens per inference (profile rate).
    #[arg(long, default_value_t = TokenProfile::REFERENCE.mean_output_tokens)]
    mean_output: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn dollars_to_micros(s: &str) -> Result<Micros> {
    let rate = Rate::parse_dollars(s.trim_start_matches('$'))?;
    let micros = rate.micros_per_million();
    anyhow::ensure!(micros.is_integer(), "price `{s}` is finer than a micro-dollar");
    Ok(Micros(micros.to_integer().try_into().context("price out of range")?))
}

/// Resolves `--rate` and describes where it came from.
fn resolve_rate(args: &CostArgs) -> Result<(Rate, String, bool)> {
    match args.rate.as_str() {
        "table" => Ok((Rate::table(), "table preset".to_owned(), false)),
        "profile" => {
            let input = dollars_to_micros(&args.input_price)?;
            let output = dollars_to_micros(&args.output_price)?;
            let pricing = PricingModel::new("support", input, output)?;
            let profile = TokenProfile::new(args.mean_input, args.mean_output)?;
            let rate = blended_rate(&pricing, &profile)?;
            let source = format!(
                "profile: {}/{} per M tokens, {} input / {} output tokens",
                input.format_usd(2),
                output.format_usd(2),
                args.mean_input,
                args.mean_output
            );
            Ok((rate, source, true))
        }
        other => {
            let rate = Rate::parse_dollars(other.trim_start_matches('$'))
                .with_context(|| format!("--rate must be `table`, `profile` or a dollar amount, got `{other}`"))?;
            Ok((rate, "explicit".to_owned(), false))
        }
    }
}

/// Line flagging a computed rate that disagrees with the table preset.
pub fn discrepancy_note(rate: &Rate) -> Option<String> {
    let table = Rate::table();
    if rate == &table {
        return None;
    }
    let diff = rate.micros_per_million() - table.micros_per_million();
    let pct = (rate.dollars_per_million() / table.dollars_per_million() - 1.0) * 100.0;
    Some(format!(
        "note: profile-blended rate {rate} differs from the table preset {table} by {} ({pct:+.2}%)",
        Rate::from_exact(diff),
    ))
}

pub fn run(args: &CostArgs) -> Result<u8> {
    let (rate, source, is_profile) = resolve_rate(args)?;
    let volumes = if args.tokens.is_empty() { TABLE_VOLUMES.to_vec() } else { args.tokens.clone() };
    let ks = if args.ks.is_empty() { TABLE_KS.to_vec() } else { args.ks.clone() };
    let table = CostTable::build(&rate, &volumes, &ks)?;
    let note = if is_profile { discrepancy_note(&rate) } else { None };
    match args.format {
        Format::Text => {
            println!("rate: {rate} ({source})");
            if let Some(note) = &note {
                println!("{note}");
            }
            print!("{}", table.render_text());
        }
        Format::Csv => {
            if let Some(note) = &note {
                eprintln!("{note}");
            }
            print!("{}", table.render_csv()?);
        }
    }
    Ok(0)
}
