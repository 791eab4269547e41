//! Deterministic synthetic option chains priced on the lattice under a known
//! per-contract volatility.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::year_fraction;
use super::{ChainRecord, DataError, Exclusion, MarketBar, OptionContract, SpotSeries};
use crate::implied_vol::price_bounds;
use crate::pricing::{price_option, ContractType, Exercise, PricingInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub root: String,
    pub start: DateTime<Utc>,
    pub bar_interval_minutes: u32,
    pub bar_count: usize,
    pub spot0: f64,
    /// Annualized drift of the spot path.
    pub spot_drift: f64,
    /// Annualized volatility of the spot path.
    pub spot_vol: f64,
    /// Strikes as multiples of `spot0`.
    pub moneyness: Vec<f64>,
    pub maturity_days: Vec<u32>,
    /// True contract volatilities are drawn uniformly from this range.
    pub vol_min: f64,
    pub vol_max: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub half_spread: f64,
    pub steps: usize,
    pub calls: bool,
    pub puts: bool,
    /// Contracts whose model price sits closer than this to the static
    /// no-arbitrage floor on any bar are dropped: their volatility is not
    /// identifiable from the price.
    pub min_time_value: f64,
    /// Share of contracts that get 3-5 blank non-quote fields on some bars.
    pub illiquid_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            root: "SPY".into(),
            start: Utc.with_ymd_and_hms(2023, 10, 2, 14, 0, 0).unwrap(),
            bar_interval_minutes: 60,
            bar_count: 80,
            spot0: 430.0,
            spot_drift: 0.0,
            spot_vol: 0.15,
            moneyness: vec![0.92, 0.96, 1.0, 1.04, 1.08],
            maturity_days: vec![45, 120],
            vol_min: 0.12,
            vol_max: 0.45,
            rate: 0.05,
            dividend_yield: 0.0,
            half_spread: 0.01,
            steps: crate::pricing::DEFAULT_PIPELINE_STEPS,
            calls: true,
            puts: true,
            min_time_value: 0.01,
            illiquid_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidConfig(m));
        if self.bar_count == 0 || self.bar_interval_minutes == 0 || self.steps == 0 {
            return bad("bar_count, bar_interval_minutes and steps must be positive".into());
        }
        if !(self.spot0 > 0.0) || !(self.spot_vol >= 0.0) {
            return bad("spot0 must be > 0 and spot_vol >= 0".into());
        }
        if self.moneyness.is_empty() || self.moneyness.iter().any(|m| !(*m > 0.0)) {
            return bad("moneyness must be a non-empty list of positive multiples".into());
        }
        if self.maturity_days.is_empty() || self.maturity_days.contains(&0) {
            return bad("maturity_days must be a non-empty list of positive day counts".into());
        }
        if !(self.vol_min > 0.0 && self.vol_min <= self.vol_max) {
            return bad(format!(
                "volatility range [{}, {}] invalid",
                self.vol_min, self.vol_max
            ));
        }
        if !(self.min_time_value >= 0.0) {
            return bad("min_time_value must be >= 0".into());
        }
        if !(self.half_spread >= 0.0) || !(0.0..=1.0).contains(&self.illiquid_fraction) {
            return bad("half_spread must be >= 0 and illiquid_fraction in [0, 1]".into());
        }
        if !self.calls && !self.puts {
            return bad("at least one of calls/puts must be enabled".into());
        }
        let horizon_minutes = self.bar_count as i64 * self.bar_interval_minutes as i64;
        let shortest = *self.maturity_days.iter().min().expect("non-empty") as i64 * 1440;
        if shortest <= horizon_minutes + self.start_minutes_into_day() {
            return bad("shortest maturity expires before the last bar".into());
        }
        Ok(())
    }

    fn start_minutes_into_day(&self) -> i64 {
        (self.start
            - self
                .start
                .date_naive()
                .and_hms_opt(0, 0, 0)
                .unwrap()
                .and_utc())
        .num_minutes()
    }

    pub fn bar_times(&self) -> Vec<DateTime<Utc>> {
        (0..self.bar_count)
            .map(|i| self.start + Duration::minutes(i as i64 * self.bar_interval_minutes as i64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticChain {
    pub records: Vec<ChainRecord>,
    pub spot: SpotSeries,
    /// Ground-truth volatility per contract, in contract order.
    pub truth: Vec<(String, f64)>,
    /// Contracts removed for lack of time value.
    pub dropped: Vec<Exclusion>,
}

fn ric_for(root: &str, maturity: chrono::NaiveDate, ct: ContractType, strike: f64) -> String {
    format!(
        "{root}{}{}{:08}",
        maturity.format("%y%m%d"),
        ct.code(),
        (strike * 1000.0).round() as i64
    )
}

pub fn generate_synthetic_chain(
    config: &SynthConfig,
    seed: u64,
) -> Result<SyntheticChain, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = config.bar_times();

    let bar_years = config.bar_interval_minutes as f64 / (365.0 * 1440.0);
    let mut spot = Vec::with_capacity(times.len());
    let mut s = config.spot0;
    for i in 0..times.len() {
        if i > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = config.spot_vol;
            s *= ((config.spot_drift - 0.5 * v * v) * bar_years + v * bar_years.sqrt() * z).exp();
        }
        spot.push(s);
    }

    let start_date = config.start.date_naive();
    let mut contracts = Vec::new();
    for &days in &config.maturity_days {
        let maturity = start_date + Duration::days(days as i64);
        for &m in &config.moneyness {
            let strike = (config.spot0 * m * 100.0).round() / 100.0;
            let types = [
                (config.calls, ContractType::Call),
                (config.puts, ContractType::Put),
            ];
            for ct in types.iter().filter(|(on, _)| *on).map(|(_, ct)| *ct) {
                contracts.push(OptionContract {
                    ric: ric_for(&config.root, maturity, ct, strike),
                    root: config.root.clone(),
                    contract_type: ct,
                    strike,
                    maturity,
                });
            }
        }
    }
    let truth: Vec<(String, f64)> = contracts
        .iter()
        .map(|c| {
            (
                c.ric.clone(),
                rng.random_range(config.vol_min..=config.vol_max),
            )
        })
        .collect();
    let illiquid: Vec<bool> = contracts
        .iter()
        .map(|_| rng.random_bool(config.illiquid_fraction))
        .collect();

    // (price, time value) per contract per bar
    let priced: Vec<Vec<(f64, f64)>> = contracts
        .par_iter()
        .zip(truth.par_iter())
        .map(|(c, (_, sigma))| {
            times
                .iter()
                .zip(&spot)
                .map(|(t, s)| {
                    let inputs = PricingInputs {
                        spot: *s,
                        strike: c.strike,
                        time_to_maturity: year_fraction(c.maturity, *t),
                        rate: config.rate,
                        dividend_yield: config.dividend_yield,
                        volatility: *sigma,
                        steps: config.steps,
                        contract_type: c.contract_type,
                        exercise: Exercise::American,
                    };
                    price_option(&inputs).map(|p| (p, p - price_bounds(&inputs).0))
                })
                .collect::<Result<Vec<(f64, f64)>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut dropped = Vec::new();
    let mut keep = vec![true; contracts.len()];
    for (ci, c) in contracts.iter().enumerate() {
        let min_tv = priced[ci]
            .iter()
            .map(|(_, tv)| *tv)
            .fold(f64::INFINITY, f64::min);
        if min_tv < config.min_time_value {
            keep[ci] = false;
            dropped.push(Exclusion::new(
                c.ric.clone(),
                "NoTimeValue",
                format!("minimum time value {min_tv:.3e}"),
            ));
        }
    }
    let prices: Vec<Vec<f64>> = priced
        .iter()
        .map(|row| row.iter().map(|(p, _)| *p).collect())
        .collect();

    let mut records = Vec::with_capacity(times.len() * contracts.len());
    for (i, t) in times.iter().enumerate() {
        for (ci, c) in contracts.iter().enumerate().filter(|(ci, _)| keep[*ci]) {
            let model = prices[ci][i];
            let prev = if i > 0 { prices[ci][i - 1] } else { model };
            let bid = (model - config.half_spread).max(0.0);
            let ask = model + config.half_spread;
            let volume = rng.random_range(0..=500u32) as f64;
            let trades = (volume / 10.0).floor();
            let mut bar = MarketBar {
                timestamp: *t,
                domain: "Market Price".into(),
                bar_type: "Intraday Summaries".into(),
                open: Some(prev),
                high: Some(prev.max(model)),
                low: Some(prev.min(model)),
                last: Some(model),
                volume: Some(volume),
                trades: Some(trades),
                open_bid: Some((prev - config.half_spread).max(0.0)),
                high_bid: Some(bid.max((prev - config.half_spread).max(0.0))),
                low_bid: Some(bid.min((prev - config.half_spread).max(0.0))),
                close_bid: Some(bid),
                bids: Some(rng.random_range(1..=40u32) as f64),
                open_ask: Some(prev + config.half_spread),
                high_ask: Some(ask.max(prev + config.half_spread)),
                low_ask: Some(ask.min(prev + config.half_spread)),
                close_ask: Some(ask),
                asks: Some(rng.random_range(1..=40u32) as f64),
                mid_open: Some(prev),
                mid_close: Some(model),
                na_count: 0,
            };
            if illiquid[ci] && (i % 3 == 0) {
                let blanks = rng.random_range(3..=5usize);
                let fields: [&mut Option<f64>; 7] = [
                    &mut bar.open,
                    &mut bar.high,
                    &mut bar.low,
                    &mut bar.last,
                    &mut bar.volume,
                    &mut bar.trades,
                    &mut bar.mid_open,
                ];
                for f in fields.into_iter().take(blanks) {
                    *f = None;
                }
            }
            bar.recount_na();
            records.push((c.clone(), bar));
        }
    }

    let truth = truth
        .into_iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t)
        .collect();
    Ok(SyntheticChain {
        records,
        spot: SpotSeries::from_points(times.into_iter().zip(spot).collect()),
        truth,
        dropped,
    })
}

pub fn write_truth(path: &Path, truth: &[(String, f64)]) -> std::io::Result<()> {
    crate::output::write_csv(
        path,
        &["ric", "sigma"],
        truth.iter().map(|(r, s)| [r.clone(), s.to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            bar_count: 4,
            moneyness: vec![0.95, 1.05],
            maturity_days: vec![60],
            steps: 100,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_synthetic_chain(&small(), 42).unwrap();
        let b = generate_synthetic_chain(&small(), 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_chain(&small(), 43).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn zero_spread_mid_is_model_price() {
        let cfg = SynthConfig {
            half_spread: 0.0,
            ..small()
        };
        let chain = generate_synthetic_chain(&cfg, 7).unwrap();
        for (c, bar) in &chain.records {
            let sigma = chain.truth.iter().find(|(r, _)| *r == c.ric).unwrap().1;
            let model = price_option(&PricingInputs {
                spot: chain.spot.at_or_before(bar.timestamp).unwrap(),
                strike: c.strike,
                time_to_maturity: year_fraction(c.maturity, bar.timestamp),
                rate: cfg.rate,
                dividend_yield: cfg.dividend_yield,
                volatility: sigma,
                steps: cfg.steps,
                contract_type: c.contract_type,
                exercise: Exercise::American,
            })
            .unwrap();
            assert_eq!(bar.mid(), Some(model));
            assert_eq!(bar.na_count, 0);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_synthetic_chain(
            &SynthConfig {
                bar_count: 0,
                ..small()
            },
            1
        )
        .is_err());
        assert!(generate_synthetic_chain(
            &SynthConfig {
                spot0: -1.0,
                ..small()
            },
            1
        )
        .is_err());
        assert!(generate_synthetic_chain(
            &SynthConfig {
                maturity_days: vec![1],
                bar_count: 100,
                ..small()
            },
            1
        )
        .is_err());
    }

    #[test]
    fn illiquid_contracts_get_three_to_five_blanks() {
        let cfg = SynthConfig {
            illiquid_fraction: 1.0,
            ..small()
        };
        let chain = generate_synthetic_chain(&cfg, 3).unwrap();
        let max_na = chain.records.iter().map(|(_, b)| b.na_count).max().unwrap();
        assert!((3..=5).contains(&max_na));
        assert!(chain.records.iter().all(|(_, b)| b.mid().is_some()));
    }

    #[test]
    fn contracts_without_time_value_dropped() {
        let cfg = SynthConfig {
            moneyness: vec![0.5, 1.0],
            vol_min: 0.15,
            vol_max: 0.15,
            puts: false,
            ..small()
        };
        let chain = generate_synthetic_chain(&cfg, 5).unwrap();
        // Deep ITM call trades at its forward floor.
        assert_eq!(chain.dropped.len(), 1);
        assert_eq!(chain.truth.len(), 1);
        assert!(chain.records.iter().all(|(c, _)| c.strike > 300.0));
    }
}
