//! Chain-to-analytics stages shared by the commands and the examples.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{IvLookup, PriceSeries};
use crate::greeks::{greek_set_with, GreekBumps, GreekSet, Region};
use crate::implied_vol::{implied_vol, IvOptions, IvSolution};
use crate::market_data::{
    bucket_by_liquidity, derive_features, parse_option_chain, parse_spot_series, ChainRecord,
    ChainSchema, DataError, EnrichedQuote, Exclusion, LiquidityLabel, ParseReport, SpotSeries,
};
use crate::pricing::Exercise;
use crate::universe::{
    rank_by_metric, select_top_bottom, ContractAnalytics, RankingMetric, Snapshot, Universe,
    UniverseError,
};

/// Placeholder volatility for inputs whose volatility is about to be solved for.
const SEED_VOL: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ChainRecord>,
    pub spot: SpotSeries,
    pub report: ParseReport,
    pub exclusions: Vec<Exclusion>,
}

pub fn load(chain: &Path, spot: &Path) -> Result<Dataset, DataError> {
    let parsed = parse_option_chain(chain, &ChainSchema::default())?;
    let (spot, spot_issues) = parse_spot_series(spot)?;
    let mut exclusions = parsed.report.issues.clone();
    exclusions.extend(spot_issues);
    Ok(Dataset {
        records: parsed.records,
        spot,
        report: parsed.report,
        exclusions,
    })
}

/// Keeps the records of contracts in the requested liquidity bucket.
pub fn filter_bucket(
    records: &[ChainRecord],
    label: LiquidityLabel,
) -> (Vec<ChainRecord>, Vec<Exclusion>) {
    let split = bucket_by_liquidity(records);
    let keep: BTreeSet<&str> = split.members(label).iter().map(String::as_str).collect();
    let mut exclusions = split.exclusions.clone();
    let other = match label {
        LiquidityLabel::Liquid => LiquidityLabel::Illiquid,
        LiquidityLabel::Illiquid => LiquidityLabel::Liquid,
    };
    exclusions.extend(split.members(other).iter().map(|r| {
        Exclusion::new(
            r.clone(),
            "OtherBucket",
            format!("{other:?} contract, run uses {label:?}"),
        )
    }));
    let kept = records
        .iter()
        .filter(|(c, _)| keep.contains(c.ric.as_str()))
        .cloned()
        .collect();
    (kept, exclusions)
}

/// Derives pricing features at each bar's own timestamp.
pub fn enrich(
    records: &[ChainRecord],
    spot: &SpotSeries,
    rate: f64,
    dividend_yield: f64,
) -> (Vec<EnrichedQuote>, Vec<Exclusion>) {
    let mut quotes = Vec::with_capacity(records.len());
    let mut exclusions = Vec::new();
    for record in records {
        match derive_features(record, spot, rate, dividend_yield, record.1.timestamp) {
            Ok(q) => quotes.push(q),
            Err(e) => exclusions.push(Exclusion::new(
                record.0.ric.clone(),
                e.reason(),
                format!("{} at {}", e, record.1.timestamp),
            )),
        }
    }
    (quotes, exclusions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSettings {
    pub steps: usize,
    pub exercise: Exercise,
    pub iv: IvOptions,
    pub bumps: GreekBumps,
    pub greeks: bool,
}

impl Default for AnalyticsSettings {
    fn default() -> Self {
        Self {
            steps: crate::pricing::DEFAULT_PIPELINE_STEPS,
            exercise: Exercise::American,
            iv: IvOptions::default(),
            bumps: GreekBumps::default(),
            greeks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteAnalytics {
    pub quote: EnrichedQuote,
    pub iv: Option<IvSolution>,
    pub greeks: Option<(GreekSet, Region)>,
    /// Why the IV or the Greeks are missing.
    pub note: Option<String>,
}

impl QuoteAnalytics {
    /// The solved volatility, only when the solver converged.
    pub fn sigma(&self) -> Option<f64> {
        self.iv.filter(|s| s.converged).map(|s| s.sigma)
    }
}

fn analyze_one(q: &EnrichedQuote, s: &AnalyticsSettings) -> QuoteAnalytics {
    let inputs = q.pricing_inputs(SEED_VOL, s.steps, s.exercise);
    let mut out = QuoteAnalytics {
        quote: q.clone(),
        iv: None,
        greeks: None,
        note: None,
    };
    match implied_vol(q.mid, &inputs, &s.iv) {
        Ok(sol) => out.iv = Some(sol),
        Err(e) => {
            out.note = Some(format!("iv: {e}"));
            return out;
        }
    }
    match out.sigma() {
        Some(sigma) if s.greeks => match greek_set_with(&inputs.with_volatility(sigma), &s.bumps) {
            Ok(g) => out.greeks = Some(g),
            Err(e) => out.note = Some(format!("greeks: {e}")),
        },
        Some(_) => {}
        None => out.note = Some("iv: solver did not converge".into()),
    }
    out
}

/// IV (and optionally Greeks) for every quote, in input order.
pub fn analyze(quotes: &[EnrichedQuote], settings: &AnalyticsSettings) -> Vec<QuoteAnalytics> {
    quotes
        .par_iter()
        .map(|q| analyze_one(q, settings))
        .collect()
}

/// Groups analytics by bar time; contracts inside a snapshot are sorted by id.
pub fn snapshots(analytics: &[QuoteAnalytics]) -> Vec<Snapshot> {
    let mut by_time: BTreeMap<DateTime<Utc>, Vec<ContractAnalytics>> = BTreeMap::new();
    for a in analytics {
        by_time
            .entry(a.quote.timestamp)
            .or_default()
            .push(ContractAnalytics {
                ric: a.quote.contract.ric.clone(),
                iv: a.sigma(),
                greeks: a.greeks.map(|g| g.0),
            });
    }
    by_time
        .into_iter()
        .map(|(time, mut contracts)| {
            contracts.sort_by(|a, b| a.ric.cmp(&b.ric));
            Snapshot { time, contracts }
        })
        .collect()
}

/// Ranks and selects at every snapshot. Failures are returned per time rather
/// than aborting the run.
pub fn select_universes(
    snapshots: &[Snapshot],
    metric: RankingMetric,
    absolute: bool,
    k: usize,
) -> (Vec<Universe>, Vec<(DateTime<Utc>, UniverseError)>) {
    let mut universes = Vec::new();
    let mut failures = Vec::new();
    for snap in snapshots {
        match rank_by_metric(snap, metric, absolute).and_then(|r| select_top_bottom(&r, k)) {
            Ok(u) => universes.push(u),
            Err(e) => failures.push((snap.time, e)),
        }
    }
    (universes, failures)
}

/// Bar timeline and per-contract mid series aligned to it; contracts in id order.
pub fn mid_series(quotes: &[EnrichedQuote]) -> (Vec<DateTime<Utc>>, Vec<PriceSeries>) {
    let timeline: Vec<DateTime<Utc>> = quotes
        .iter()
        .map(|q| q.timestamp)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot: HashMap<DateTime<Utc>, usize> =
        timeline.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut series: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for q in quotes {
        let s = series
            .entry(q.contract.ric.clone())
            .or_insert_with(|| vec![None; timeline.len()]);
        s[slot[&q.timestamp]] = Some(q.mid);
    }
    (timeline, series.into_iter().collect())
}

pub fn iv_lookup(analytics: &[QuoteAnalytics]) -> IvLookup {
    analytics
        .iter()
        .filter_map(|a| {
            a.sigma()
                .map(|s| ((a.quote.timestamp, a.quote.contract.ric.clone()), s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{generate_synthetic_chain, SynthConfig};

    fn small() -> SynthConfig {
        SynthConfig {
            bar_count: 4,
            moneyness: vec![0.95, 1.0, 1.05],
            maturity_days: vec![60],
            half_spread: 0.0,
            steps: 100,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn synthetic_round_trip_through_pipeline() {
        let cfg = small();
        let chain = generate_synthetic_chain(&cfg, 7).unwrap();
        let (quotes, excl) = enrich(&chain.records, &chain.spot, cfg.rate, cfg.dividend_yield);
        assert!(excl.is_empty());
        let settings = AnalyticsSettings {
            steps: 100,
            greeks: true,
            ..Default::default()
        };
        let analytics = analyze(&quotes, &settings);
        let truth: HashMap<_, _> = chain.truth.iter().cloned().collect();
        for a in &analytics {
            let sigma = a.sigma().expect("converged");
            assert!((sigma - truth[&a.quote.contract.ric]).abs() < 1e-4);
            assert!(a.greeks.is_some());
        }
        let snaps = snapshots(&analytics);
        assert_eq!(snaps.len(), 4);
        let (us, fails) = select_universes(&snaps, RankingMetric::Iv, false, 3);
        assert_eq!(us.len(), 4);
        assert!(fails.is_empty());
        // ranking by IV recovers the ranking by true sigma
        let mut by_truth = chain.truth.clone();
        by_truth.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<_> = by_truth[..3].iter().map(|p| p.0.clone()).collect();
        assert_eq!(us[0].top, top);
    }

    #[test]
    fn mids_align_to_timeline() {
        let cfg = small();
        let chain = generate_synthetic_chain(&cfg, 1).unwrap();
        let (mut quotes, _) = enrich(&chain.records, &chain.spot, 0.05, 0.0);
        let dropped = quotes.remove(1);
        let (timeline, series) = mid_series(&quotes);
        assert_eq!(timeline.len(), 4);
        let s = &series
            .iter()
            .find(|(r, _)| *r == dropped.contract.ric)
            .unwrap()
            .1;
        assert_eq!(s.iter().filter(|m| m.is_none()).count(), 1);
    }
}
