//! Generating a synthetic chain with known volatilities and checking that
//! the solver gets them back.

use std::collections::HashMap;

use amopt::market_data::{generate_synthetic_chain, SynthConfig};
use amopt::pipeline::{analyze, enrich, AnalyticsSettings};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        bar_count: 3,
        half_spread: 0.0,
        steps: 200,
        ..SynthConfig::default()
    };
    let chain = generate_synthetic_chain(&cfg, 2024)?;
    println!(
        "{} contracts, {} records, {} dropped",
        chain.truth.len(),
        chain.records.len(),
        chain.dropped.len()
    );

    let (quotes, _) = enrich(&chain.records, &chain.spot, cfg.rate, cfg.dividend_yield);
    let analytics = analyze(
        &quotes,
        &AnalyticsSettings {
            steps: 200,
            ..AnalyticsSettings::default()
        },
    );
    let truth: HashMap<&str, f64> = chain.truth.iter().map(|(r, s)| (r.as_str(), *s)).collect();
    let worst = analytics
        .iter()
        .map(|a| (a.sigma().unwrap_or(f64::NAN) - truth[a.quote.contract.ric.as_str()]).abs())
        .fold(0.0, f64::max);
    println!(
        "largest |solved - true| sigma over {} quotes: {worst:.2e}",
        analytics.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
