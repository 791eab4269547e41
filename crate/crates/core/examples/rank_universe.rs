//! Ranking contracts by IV, single Greeks and combined Greeks, then taking
//! the top and bottom k.

use amopt::market_data::{generate_synthetic_chain, SynthConfig};
use amopt::pipeline::{analyze, enrich, snapshots, AnalyticsSettings};
use amopt::universe::{rank_by_metric, select_top_bottom, RankingMetric};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        bar_count: 2,
        maturity_days: vec![40, 100],
        steps: 150,
        ..SynthConfig::default()
    };
    let chain = generate_synthetic_chain(&cfg, 11)?;
    let (quotes, _) = enrich(&chain.records, &chain.spot, cfg.rate, cfg.dividend_yield);
    let settings = AnalyticsSettings {
        steps: 150,
        greeks: true,
        ..AnalyticsSettings::default()
    };
    let analytics = analyze(&quotes, &settings);
    let snap = &snapshots(&analytics)[0];
    println!("{} contracts at {}", snap.contracts.len(), snap.time);

    for name in ["iv", "delta", "gamma", "vega", "delta_gamma", "vega_rho"] {
        let metric: RankingMetric = name.parse()?;
        let ranking = rank_by_metric(snap, metric, false)?;
        let u = select_top_bottom(&ranking, 3)?;
        println!("{metric:<12} top {:?}", u.top);
        println!("{:<12} bottom {:?}", "", u.bottom);
    }

    let abs = rank_by_metric(snap, "delta".parse()?, true)?;
    println!(
        "largest |delta|: {} ({:.3})",
        abs.entries[0].0, abs.entries[0].1
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
