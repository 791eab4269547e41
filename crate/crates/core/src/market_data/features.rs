use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chain::{format_timestamp, parse_timestamp};
use super::{ChainRecord, DataError, Exclusion, OptionContract};
use crate::pricing::{Exercise, PricingInputs};

const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("no bid/ask midpoint and no Mid Close")]
    NoMid,
    #[error("contract expired: time to maturity {0} years")]
    ExpiredContract(f64),
    #[error("no spot price at or before {0}")]
    NoSpot(DateTime<Utc>),
}

impl FeatureError {
    pub fn reason(&self) -> &'static str {
        match self {
            FeatureError::NoMid => "NoMid",
            FeatureError::ExpiredContract(_) => "ExpiredContract",
            FeatureError::NoSpot(_) => "NoSpot",
        }
    }
}

/// Underlying prices ordered by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpotSeries {
    points: Vec<(DateTime<Utc>, f64)>,
}

impl SpotSeries {
    /// Sorts by time; non-positive prices are dropped and later duplicates win.
    pub fn from_points(mut points: Vec<(DateTime<Utc>, f64)>) -> Self {
        points.retain(|(_, p)| p.is_finite() && *p > 0.0);
        points.sort_by_key(|(t, _)| *t);
        let mut deduped: Vec<(DateTime<Utc>, f64)> = Vec::with_capacity(points.len());
        for p in points {
            match deduped.last_mut() {
                Some(last) if last.0 == p.0 => *last = p,
                _ => deduped.push(p),
            }
        }
        Self { points: deduped }
    }

    /// Most recent price at or before `t`.
    pub fn at_or_before(&self, t: DateTime<Utc>) -> Option<f64> {
        let idx = self.points.partition_point(|(ts, _)| *ts <= t);
        idx.checked_sub(1).map(|i| self.points[i].1)
    }

    pub fn points(&self) -> &[(DateTime<Utc>, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a `Date-Time, Last` file. Unusable rows are reported, not fatal.
pub fn parse_spot_series(path: &Path) -> Result<(SpotSeries, Vec<Exclusion>), DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.into()))
    };
    let (ti, li) = (col("Date-Time")?, col("Last")?);
    let mut points = Vec::new();
    let mut issues = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let raw_t = row.get(ti).unwrap_or("");
        let raw_p = row.get(li).unwrap_or("");
        match (
            parse_timestamp(raw_t),
            raw_p
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p > 0.0),
        ) {
            (Some(t), Some(p)) => points.push((t, p)),
            _ => issues.push(Exclusion::new(
                "<spot>",
                "BadSpotRow",
                format!("`{raw_t}`, `{raw_p}`"),
            )),
        }
    }
    Ok((SpotSeries::from_points(points), issues))
}

pub fn write_spot_series(path: &Path, series: &SpotSeries) -> std::io::Result<()> {
    crate::output::write_csv(
        path,
        &["Date-Time", "Last"],
        series
            .points()
            .iter()
            .map(|(t, p)| [format_timestamp(t), p.to_string()]),
    )
}

/// A bar enriched with everything a valuation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedQuote {
    pub contract: OptionContract,
    pub timestamp: DateTime<Utc>,
    pub spot: f64,
    pub mid: f64,
    /// ACT/365 years.
    pub time_to_maturity: f64,
    pub rate: f64,
    pub dividend_yield: f64,
}

impl EnrichedQuote {
    pub fn pricing_inputs(
        &self,
        volatility: f64,
        steps: usize,
        exercise: Exercise,
    ) -> PricingInputs {
        PricingInputs {
            spot: self.spot,
            strike: self.contract.strike,
            time_to_maturity: self.time_to_maturity,
            rate: self.rate,
            dividend_yield: self.dividend_yield,
            volatility,
            steps,
            contract_type: self.contract.contract_type,
            exercise,
        }
    }
}

/// Years from `valuation_time` to the contract's maturity (00:00 UTC), ACT/365.
pub fn year_fraction(maturity: chrono::NaiveDate, valuation_time: DateTime<Utc>) -> f64 {
    let expiry = maturity.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    (expiry - valuation_time).num_milliseconds() as f64 / 1000.0 / SECONDS_PER_YEAR
}

pub fn derive_features(
    record: &ChainRecord,
    spot_series: &SpotSeries,
    rate: f64,
    dividend_yield: f64,
    valuation_time: DateTime<Utc>,
) -> Result<EnrichedQuote, FeatureError> {
    let (contract, bar) = record;
    let mid = bar.mid().ok_or(FeatureError::NoMid)?;
    let spot = spot_series
        .at_or_before(valuation_time)
        .ok_or(FeatureError::NoSpot(valuation_time))?;
    let time_to_maturity = year_fraction(contract.maturity, valuation_time);
    if time_to_maturity <= 0.0 {
        return Err(FeatureError::ExpiredContract(time_to_maturity));
    }
    Ok(EnrichedQuote {
        contract: contract.clone(),
        timestamp: valuation_time,
        spot,
        mid,
        time_to_maturity,
        rate,
        dividend_yield,
    })
}
