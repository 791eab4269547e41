//! Option-chain bar data: parsing, liquidity bucketing, feature derivation
//! and synthetic chains.

mod chain;
mod features;
mod liquidity;
mod synth;

pub use chain::{
    format_timestamp, parse_option_chain, parse_option_chain_reader, parse_timestamp,
    write_option_chain, ChainSchema, ParseReport, ParsedChain, CHAIN_COLUMNS,
};
pub use features::{
    derive_features, parse_spot_series, write_spot_series, EnrichedQuote, FeatureError, SpotSeries,
};
pub use liquidity::{bucket_by_liquidity, LiquidityBucket, LiquidityLabel, LiquiditySplit};
pub use synth::{generate_synthetic_chain, write_truth, SynthConfig, SyntheticChain};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::ContractType;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header lacks required column `{0}`")]
    MissingColumn(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pricing(#[from] crate::pricing::PricingError),
}

/// Identity of one listed option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionContract {
    pub ric: String,
    pub root: String,
    pub contract_type: ContractType,
    pub strike: f64,
    pub maturity: NaiveDate,
}

/// One bar of the chain. Every numeric column is optional; `na_count` counts
/// the absent ones among [`MarketBar::TRACKED`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarketBar {
    pub timestamp: DateTime<Utc>,
    pub domain: String,
    pub bar_type: String,
    pub open: Option<f64>,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub last: Option<f64>,
    pub volume: Option<f64>,
    pub trades: Option<f64>,
    pub open_bid: Option<f64>,
    pub high_bid: Option<f64>,
    pub low_bid: Option<f64>,
    pub close_bid: Option<f64>,
    pub bids: Option<f64>,
    pub open_ask: Option<f64>,
    pub high_ask: Option<f64>,
    pub low_ask: Option<f64>,
    pub close_ask: Option<f64>,
    pub asks: Option<f64>,
    pub mid_open: Option<f64>,
    pub mid_close: Option<f64>,
    pub na_count: u32,
}

impl MarketBar {
    /// Number of tracked numeric columns.
    pub const TRACKED: usize = 18;

    pub fn numeric_fields(&self) -> [Option<f64>; Self::TRACKED] {
        [
            self.open,
            self.high,
            self.low,
            self.last,
            self.volume,
            self.trades,
            self.open_bid,
            self.high_bid,
            self.low_bid,
            self.close_bid,
            self.bids,
            self.open_ask,
            self.high_ask,
            self.low_ask,
            self.close_ask,
            self.asks,
            self.mid_open,
            self.mid_close,
        ]
    }

    pub(crate) fn numeric_fields_mut(&mut self) -> [&mut Option<f64>; Self::TRACKED] {
        [
            &mut self.open,
            &mut self.high,
            &mut self.low,
            &mut self.last,
            &mut self.volume,
            &mut self.trades,
            &mut self.open_bid,
            &mut self.high_bid,
            &mut self.low_bid,
            &mut self.close_bid,
            &mut self.bids,
            &mut self.open_ask,
            &mut self.high_ask,
            &mut self.low_ask,
            &mut self.close_ask,
            &mut self.asks,
            &mut self.mid_open,
            &mut self.mid_close,
        ]
    }

    pub fn recount_na(&mut self) {
        self.na_count = self.numeric_fields().iter().filter(|v| v.is_none()).count() as u32;
    }

    /// Low above high or bid above ask, whenever both sides are present.
    pub fn inconsistency(&self) -> Option<String> {
        if let (Some(lo), Some(hi)) = (self.low, self.high) {
            if lo > hi {
                return Some(format!("low {lo} > high {hi}"));
            }
        }
        if let (Some(b), Some(a)) = (self.close_bid, self.close_ask) {
            if b > a {
                return Some(format!("close bid {b} > close ask {a}"));
            }
        }
        None
    }

    /// Bid/ask midpoint, falling back to the Mid Close column.
    pub fn mid(&self) -> Option<f64> {
        match (self.close_bid, self.close_ask) {
            (Some(b), Some(a)) => Some(0.5 * (b + a)),
            _ => self.mid_close,
        }
    }
}

pub type ChainRecord = (OptionContract, MarketBar);

/// One line of an exclusions/parse report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub ric: String,
    pub reason: String,
    pub detail: String,
}

impl Exclusion {
    pub fn new(
        ric: impl Into<String>,
        reason: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            ric: ric.into(),
            reason: reason.into(),
            detail: detail.into(),
        }
    }
}

pub const EXCLUSION_HEADER: [&str; 3] = ["ric", "reason", "detail"];

pub fn write_exclusions(path: &std::path::Path, rows: &[Exclusion]) -> std::io::Result<()> {
    crate::output::write_csv(
        path,
        &EXCLUSION_HEADER,
        rows.iter()
            .map(|e| [e.ric.clone(), e.reason.clone(), e.detail.clone()]),
    )
}
