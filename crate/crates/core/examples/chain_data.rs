//! Writing, parsing and cleaning an option-chain file, then splitting it by
//! liquidity and deriving pricing features.

use amopt::market_data::{
    bucket_by_liquidity, derive_features, generate_synthetic_chain, parse_option_chain,
    write_option_chain, ChainSchema, LiquidityLabel, SynthConfig,
};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        bar_count: 12,
        moneyness: vec![0.95, 1.0, 1.05],
        maturity_days: vec![30, 90],
        illiquid_fraction: 0.4,
        steps: 100,
        ..SynthConfig::default()
    };
    let synth = generate_synthetic_chain(&cfg, 3)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("chain.csv");
    write_option_chain(&path, &synth.records)?;

    let parsed = parse_option_chain(&path, &ChainSchema::default())?;
    println!(
        "read {} rows, parsed {}, {} issues",
        parsed.report.rows_read,
        parsed.report.rows_parsed,
        parsed.report.issues.len()
    );

    let split = bucket_by_liquidity(&parsed.records);
    for label in [LiquidityLabel::Liquid, LiquidityLabel::Illiquid] {
        println!(
            "{label:?} (NA band {:?}): {} contracts",
            label.band(),
            split.members(label).len()
        );
    }
    for e in &split.exclusions {
        println!("excluded {}: {} ({})", e.ric, e.reason, e.detail);
    }

    let record = &parsed.records[0];
    let q = derive_features(record, &synth.spot, 0.05, 0.0, record.1.timestamp)?;
    println!(
        "{} at {}: spot {:.2} strike {} mid {:.4} T {:.4}y",
        q.contract.ric, q.timestamp, q.spot, q.contract.strike, q.mid, q.time_to_maturity
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
