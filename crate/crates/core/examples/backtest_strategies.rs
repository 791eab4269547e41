//! From a synthetic chain to equity curves: long-short, dynamic and static
//! strategies over the same bars. Option returns on one underlying are close
//! to collinear, so the static estimate is shrunk.

use amopt::backtest::{
    compute_returns, run_dynamic, run_long_short, run_static, DynamicConfig, Solver, StaticParams,
};
use amopt::market_data::{generate_synthetic_chain, SynthConfig};
use amopt::optimizer::PortfolioConstraints;
use amopt::pipeline::{
    analyze, enrich, iv_lookup, mid_series, select_universes, snapshots, AnalyticsSettings,
};
use amopt::universe::RankingMetric;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        bar_count: 40,
        steps: 120,
        ..SynthConfig::default()
    };
    let chain = generate_synthetic_chain(&cfg, 42)?;
    let (quotes, _) = enrich(&chain.records, &chain.spot, cfg.rate, cfg.dividend_yield);
    let analytics = analyze(
        &quotes,
        &AnalyticsSettings {
            steps: 120,
            ..AnalyticsSettings::default()
        },
    );
    let (universes, _) = select_universes(&snapshots(&analytics), RankingMetric::Iv, false, 3);
    let (timeline, series) = mid_series(&quotes);
    let (returns, _) = compute_returns(&series, &timeline)?;

    let mut reports = vec![run_long_short(&universes, &returns, cfg.rate)?];
    let dynamic = DynamicConfig {
        window: 15,
        rebalance_every: 5,
        solver: Solver::BoxConstrained {
            lambda: 1.0,
            constraints: PortfolioConstraints::default(),
        },
    };
    reports.push(run_dynamic(
        &universes,
        &returns,
        &dynamic,
        Some(&iv_lookup(&analytics)),
        cfg.rate,
    )?);
    let rics: Vec<String> = universes[0].members().cloned().collect();
    let whole = StaticParams {
        estimation: 0..returns.periods(),
        start: 0,
    };
    for solver in [
        Solver::Shrinkage {
            delta: 0.5,
            target: None,
        },
        Solver::Fixed {
            weights: vec![1.0 / 6.0; 6],
        },
    ] {
        reports.push(run_static(
            &returns, &rics, &solver, &whole, None, cfg.rate,
        )?);
    }

    println!(
        "{:<11} {:>10} {:>10} {:>9} {:>10}",
        "strategy", "cumulative", "vol", "sharpe", "drawdown"
    );
    for r in &reports {
        let m = &r.metrics;
        let sharpe = m
            .sharpe
            .map(|s| format!("{s:.2}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<11} {:>10.4} {:>10.4} {:>9} {:>10.4}",
            r.strategy, m.cumulative_return, m.annualized_volatility, sharpe, m.max_drawdown
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
