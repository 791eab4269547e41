use std::path::Path;

use rayon::prelude::*;

use super::config::{RunConfig, Strategy};
use super::CliError;
use crate::backtest::{
    compute_returns, run_dynamic, run_long_short, run_static, write_bundle, BacktestError,
    BacktestReport, DynamicConfig, Solver, StaticParams,
};
use crate::market_data::{
    format_timestamp, generate_synthetic_chain, write_exclusions, write_option_chain,
    write_spot_series, write_truth, DataError, EnrichedQuote, Exclusion,
};
use crate::optimizer::OptimizerError;
use crate::output::write_csv;
use crate::pipeline::{self, AnalyticsSettings, QuoteAnalytics};
use crate::pricing::{price_option, Exercise};

fn data_error(e: DataError) -> CliError {
    match e {
        DataError::MissingColumn(c) => {
            CliError::Validation(format!("chain file is missing column `{c}`"))
        }
        e @ (DataError::Io { .. } | DataError::InvalidConfig(_)) => {
            CliError::Validation(e.to_string())
        }
        e => CliError::Runtime(e.to_string()),
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("writing output: {e}"))
}

fn backtest_error(e: BacktestError) -> CliError {
    match e {
        BacktestError::Optimizer(e @ OptimizerError::InfeasibleConstraints { .. }) => {
            CliError::Validation(e.to_string())
        }
        e => CliError::Runtime(format!("backtest: {e}")),
    }
}

struct Prepared {
    quotes: Vec<EnrichedQuote>,
    exclusions: Vec<Exclusion>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (chain, spot) = cfg.data_paths()?;
    let ds = pipeline::load(&chain, &spot).map_err(data_error)?;
    if ds.records.is_empty() {
        return Err(CliError::Validation(format!(
            "no rows in {}",
            chain.display()
        )));
    }
    if ds.spot.is_empty() {
        return Err(CliError::Validation(format!(
            "no rows in {}",
            spot.display()
        )));
    }
    let (kept, bucket_excl) = pipeline::filter_bucket(&ds.records, cfg.liquidity_label()?);
    let (quotes, feature_excl) = pipeline::enrich(&kept, &ds.spot, cfg.rate, cfg.dividend_yield);
    let mut exclusions = ds.exclusions;
    exclusions.extend(bucket_excl);
    exclusions.extend(feature_excl);
    if quotes.is_empty() {
        return Err(CliError::Validation(format!(
            "no usable quotes in the {} bucket of {}",
            cfg.liquidity,
            chain.display()
        )));
    }
    Ok(Prepared { quotes, exclusions })
}

fn settings(cfg: &RunConfig, greeks: bool) -> Result<AnalyticsSettings, CliError> {
    Ok(AnalyticsSettings {
        steps: cfg.steps,
        exercise: cfg.exercise_style()?,
        iv: cfg.iv_options(),
        greeks,
        ..AnalyticsSettings::default()
    })
}

fn analytics_exclusions(analytics: &[QuoteAnalytics]) -> Vec<Exclusion> {
    analytics
        .iter()
        .filter_map(|a| {
            a.note.as_ref().map(|n| {
                Exclusion::new(
                    a.quote.contract.ric.clone(),
                    "NoAnalytics",
                    format!("{n} at {}", format_timestamp(&a.quote.timestamp)),
                )
            })
        })
        .collect()
}

fn finish(out: &Path, exclusions: &[Exclusion]) -> Result<(), CliError> {
    write_exclusions(&out.join("exclusions.csv"), exclusions).map_err(io_error)
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn price(cfg: &RunConfig) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let exercise = cfg.exercise_style()?;
    let rows: Vec<Result<Vec<String>, Exclusion>> = p
        .quotes
        .par_iter()
        .map(|q| {
            let inputs = q.pricing_inputs(cfg.volatility, cfg.steps, exercise);
            let value = price_option(&inputs)
                .and_then(|v| Ok((v, price_option(&inputs.with_exercise(Exercise::European))?)));
            match value {
                Ok((model, european)) => Ok(vec![
                    q.contract.ric.clone(),
                    format_timestamp(&q.timestamp),
                    num(q.spot),
                    num(q.contract.strike),
                    num(q.time_to_maturity),
                    num(cfg.volatility),
                    num(model),
                    num(european),
                    num(q.mid),
                ]),
                Err(e) => Err(Exclusion::new(
                    q.contract.ric.clone(),
                    "PricingError",
                    e.to_string(),
                )),
            }
        })
        .collect();
    let mut exclusions = p.exclusions;
    let mut ok = Vec::new();
    for r in rows {
        match r {
            Ok(row) => ok.push(row),
            Err(e) => exclusions.push(e),
        }
    }
    let header = [
        "ric",
        "timestamp",
        "spot",
        "strike",
        "time_to_maturity",
        "volatility",
        "model_price",
        "european_price",
        "market_mid",
    ];
    let n = ok.len();
    write_csv(&cfg.out.join("prices.csv"), &header, ok).map_err(io_error)?;
    finish(&cfg.out, &exclusions)?;
    println!(
        "priced {n} quotes -> {}",
        cfg.out.join("prices.csv").display()
    );
    Ok(())
}

pub fn iv(cfg: &RunConfig) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let analytics = pipeline::analyze(&p.quotes, &settings(cfg, false)?);
    let rows = analytics.iter().map(|a| {
        let q = &a.quote;
        let mut row = vec![
            q.contract.ric.clone(),
            format_timestamp(&q.timestamp),
            num(q.mid),
        ];
        match a.iv {
            Some(s) => row.extend([
                num(s.sigma),
                s.iterations.to_string(),
                s.method.as_str().to_string(),
                s.converged.to_string(),
            ]),
            None => row.extend([String::new(), "0".into(), "none".into(), "false".into()]),
        }
        row
    });
    write_csv(
        &cfg.out.join("iv.csv"),
        &[
            "ric",
            "timestamp",
            "market_mid",
            "iv",
            "iterations",
            "method",
            "converged",
        ],
        rows,
    )
    .map_err(io_error)?;
    let mut exclusions = p.exclusions;
    exclusions.extend(analytics_exclusions(&analytics));
    finish(&cfg.out, &exclusions)?;
    let converged = analytics.iter().filter(|a| a.sigma().is_some()).count();
    println!(
        "solved {converged}/{} quotes -> {}",
        analytics.len(),
        cfg.out.join("iv.csv").display()
    );
    Ok(())
}

pub fn greeks(cfg: &RunConfig) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let analytics = pipeline::analyze(&p.quotes, &settings(cfg, true)?);
    let rows = analytics.iter().filter_map(|a| {
        let ((g, region), sigma) = (a.greeks?, a.sigma()?);
        Some(vec![
            a.quote.contract.ric.clone(),
            format_timestamp(&a.quote.timestamp),
            num(sigma),
            num(g.delta),
            num(g.gamma),
            num(g.theta),
            num(g.vega),
            num(g.rho),
            region.as_str().to_string(),
        ])
    });
    let header = [
        "ric",
        "timestamp",
        "iv",
        "delta",
        "gamma",
        "theta",
        "vega",
        "rho",
        "region",
    ];
    write_csv(&cfg.out.join("greeks.csv"), &header, rows).map_err(io_error)?;
    let mut exclusions = p.exclusions;
    exclusions.extend(analytics_exclusions(&analytics));
    finish(&cfg.out, &exclusions)?;
    let done = analytics.iter().filter(|a| a.greeks.is_some()).count();
    println!(
        "greeks for {done}/{} quotes -> {}",
        analytics.len(),
        cfg.out.join("greeks.csv").display()
    );
    Ok(())
}

struct Selection {
    analytics: Vec<QuoteAnalytics>,
    universes: Vec<crate::universe::Universe>,
    exclusions: Vec<Exclusion>,
    quotes: Vec<EnrichedQuote>,
}

fn selection(cfg: &RunConfig) -> Result<Selection, CliError> {
    let metric = cfg.ranking_metric()?;
    let p = prepare(cfg)?;
    let analytics = pipeline::analyze(&p.quotes, &settings(cfg, metric.needs_greeks())?);
    let snaps = pipeline::snapshots(&analytics);
    let (universes, failures) = pipeline::select_universes(&snaps, metric, cfg.absolute, cfg.k);
    let mut exclusions = p.exclusions;
    exclusions.extend(analytics_exclusions(&analytics));
    exclusions.extend(
        failures.iter().map(|(t, e)| {
            Exclusion::new("", "NoSelection", format!("{}: {e}", format_timestamp(t)))
        }),
    );
    Ok(Selection {
        analytics,
        universes,
        exclusions,
        quotes: p.quotes,
    })
}

pub fn select(cfg: &RunConfig) -> Result<(), CliError> {
    let s = selection(cfg)?;
    let mut rows = Vec::new();
    for u in &s.universes {
        let t = format_timestamp(&u.decision_time);
        let score = |ric: &str| {
            u.metric_values
                .iter()
                .find(|(r, _)| r == ric)
                .map(|p| p.1)
                .unwrap_or(f64::NAN)
        };
        for (side, list) in [("top", &u.top), ("bottom", &u.bottom)] {
            for (i, ric) in list.iter().enumerate() {
                rows.push(vec![
                    t.clone(),
                    ric.clone(),
                    num(score(ric)),
                    side.to_string(),
                    (i + 1).to_string(),
                ]);
            }
        }
    }
    write_csv(
        &cfg.out.join("universe.csv"),
        &["timestamp", "ric", "score", "side", "rank"],
        rows,
    )
    .map_err(io_error)?;
    finish(&cfg.out, &s.exclusions)?;
    println!(
        "selected at {}/{} bars -> {}",
        s.universes.len(),
        pipeline::snapshots(&s.analytics).len(),
        cfg.out.join("universe.csv").display()
    );
    Ok(())
}

fn run_strategy(cfg: &RunConfig) -> Result<(BacktestReport, Vec<Exclusion>), CliError> {
    let strategy = cfg.strategy_kind()?;
    if strategy == Strategy::Dynamic {
        cfg.constraints().validate(2 * cfg.k).map_err(|e| {
            CliError::Validation(format!("dynamic strategy with k = {}: {e}", cfg.k))
        })?;
    }
    let s = selection(cfg)?;
    let (timeline, series) = pipeline::mid_series(&s.quotes);
    let (returns, gaps) = compute_returns(&series, &timeline).map_err(backtest_error)?;
    if returns.periods() == 0 {
        return Err(CliError::Validation(
            "the chain has a single bar; a backtest needs at least two".into(),
        ));
    }
    let rate = cfg.rate;
    let mut report = match strategy {
        Strategy::LongShort => run_long_short(&s.universes, &returns, rate),
        Strategy::Dynamic => {
            let dc = DynamicConfig {
                window: cfg.window,
                rebalance_every: cfg.rebalance_every,
                solver: Solver::BoxConstrained {
                    lambda: cfg.risk_aversion,
                    constraints: cfg.constraints(),
                },
            };
            run_dynamic(
                &s.universes,
                &returns,
                &dc,
                Some(&pipeline::iv_lookup(&s.analytics)),
                rate,
            )
        }
        kind => {
            let first = s
                .universes
                .first()
                .filter(|u| u.decision_time == returns.timestamps[0])
                .ok_or_else(|| {
                    CliError::Runtime("no universe could be selected at the first bar".into())
                })?;
            let rics: Vec<String> = first.members().cloned().collect();
            let interval = returns.bar_interval().map_err(backtest_error)?;
            let rf_per_bar = rate * interval.as_seconds_f64() / (365.0 * 86_400.0);
            let target = cfg.target_return;
            let solver = match kind {
                Strategy::Markowitz => Solver::Markowitz { target },
                Strategy::RiskFree => Solver::RiskFree {
                    rf: rf_per_bar,
                    target,
                },
                Strategy::Shrinkage => Solver::Shrinkage {
                    delta: cfg.shrinkage,
                    target,
                },
                Strategy::Robust => Solver::Robust {
                    kappa: cfg.kappa,
                    target,
                },
                Strategy::LongShort | Strategy::Dynamic => unreachable!("handled above"),
            };
            let params = StaticParams {
                estimation: 0..returns.periods(),
                start: 0,
            };
            run_static(&returns, &rics, &solver, &params, None, rate)
        }
    }
    .map_err(backtest_error)?;
    report.events.extend(gaps);
    report.events.sort_by_key(|e| e.time);
    Ok((report, s.exclusions))
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let (report, exclusions) = run_strategy(cfg)?;
    let mut rows = Vec::new();
    for r in &report.rebalances {
        let t = format_timestamp(&r.time);
        let w = &r.weights;
        for (ric, weight) in w.universe.iter().zip(&w.weights) {
            rows.push(vec![
                t.clone(),
                ric.clone(),
                num(*weight),
                report.strategy.clone(),
                num(w.objective_value),
            ]);
        }
        if w.cash != 0.0 && report.strategy == "riskfree" {
            rows.push(vec![
                t.clone(),
                "CASH".into(),
                num(w.cash),
                report.strategy.clone(),
                num(w.objective_value),
            ]);
        }
    }
    let header = ["timestamp", "ric", "weight", "strategy", "objective_value"];
    write_csv(&cfg.out.join("optimal_weights.csv"), &header, rows).map_err(io_error)?;
    finish(&cfg.out, &exclusions)?;
    println!(
        "{} weight sets -> {}",
        report.rebalances.len(),
        cfg.out.join("optimal_weights.csv").display()
    );
    Ok(())
}

pub fn backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let (report, exclusions) = run_strategy(cfg)?;
    write_bundle(&cfg.out, &report, cfg).map_err(io_error)?;
    let toml =
        toml::to_string(cfg).map_err(|e| CliError::Runtime(format!("serializing config: {e}")))?;
    crate::output::atomic_write(&cfg.out.join("run_config.toml"), |w| {
        w.write_all(toml.as_bytes())
    })
    .map_err(io_error)?;
    finish(&cfg.out, &exclusions)?;
    let m = &report.metrics;
    println!(
        "{}: cumulative {:.4}, vol {:.4}, sharpe {}, max drawdown {:.4} -> {}",
        report.strategy,
        m.cumulative_return,
        m.annualized_volatility,
        m.sharpe
            .map(|s| format!("{s:.3}"))
            .unwrap_or_else(|| "n/a".into()),
        m.max_drawdown,
        cfg.out.display()
    );
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let chain = generate_synthetic_chain(&cfg.synth, cfg.seed).map_err(data_error)?;
    let out = &cfg.out;
    write_option_chain(&out.join("chain.csv"), &chain.records).map_err(io_error)?;
    write_spot_series(&out.join("spot.csv"), &chain.spot).map_err(io_error)?;
    write_truth(&out.join("truth.csv"), &chain.truth).map_err(io_error)?;
    write_exclusions(&out.join("dropped.csv"), &chain.dropped).map_err(io_error)?;
    println!(
        "{} contracts, {} bars -> {}",
        chain.truth.len(),
        chain.spot.len(),
        out.display()
    );
    Ok(())
}
