//! Realized returns, strategy simulation and performance metrics.

mod engine;
mod report;

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, TimeDelta, Utc};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{OptimizerError, WeightVector};

pub use engine::{
    run_dynamic, run_long_short, run_static, DynamicConfig, IvLookup, Solver, StaticParams,
};
pub use report::{write_bundle, ReportSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("non-positive mid {mid} for {ric} at {time}")]
    NonPositiveMid {
        ric: String,
        time: DateTime<Utc>,
        mid: f64,
    },
    #[error("timeline must be strictly increasing (index {0})")]
    UnorderedTimeline(usize),
    #[error("series for {ric} has {got} points but the timeline has {expected}")]
    LengthMismatch {
        ric: String,
        got: usize,
        expected: usize,
    },
    #[error("equity curve needs at least 2 points, got {0}")]
    CurveTooShort(usize),
    #[error("no universe for decision time {0}")]
    MissingUniverse(DateTime<Utc>),
    #[error("contract {0} has no return series")]
    UnknownContract(String),
    #[error("portfolio value wiped out over the bar starting {0}")]
    Ruin(DateTime<Utc>),
    #[error("invalid `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// A contract lacks a return for a bar.
    Gap,
    /// A held position had no return and was moved to cash.
    ToCash,
    /// A rebalance solve failed and the previous weights were kept.
    SolverFallback,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Gap => "gap",
            EventKind::ToCash => "to_cash",
            EventKind::SolverFallback => "solver_fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: DateTime<Utc>,
    pub kind: EventKind,
    pub detail: String,
}

/// Simple returns on a bar timeline. Row `j` holds the return from bar `j`
/// to bar `j + 1`, so there is one row fewer than timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub timestamps: Vec<DateTime<Utc>>,
    pub assets: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    index: HashMap<String, usize>,
}

impl ReturnMatrix {
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        assets: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, BacktestError> {
        check_timeline(&timestamps)?;
        if rows.len() + 1 != timestamps.len() {
            return Err(BacktestError::InvalidInput {
                field: "rows",
                reason: format!(
                    "{} return rows for {} timestamps",
                    rows.len(),
                    timestamps.len()
                ),
            });
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != assets.len()) {
            return Err(BacktestError::InvalidInput {
                field: "rows",
                reason: format!("row {bad} has the wrong width"),
            });
        }
        let index = assets
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(Self {
            timestamps,
            assets,
            rows,
            index,
        })
    }

    pub fn periods(&self) -> usize {
        self.rows.len()
    }

    pub fn index_of(&self, ric: &str) -> Result<usize, BacktestError> {
        self.index
            .get(ric)
            .copied()
            .ok_or_else(|| BacktestError::UnknownContract(ric.to_string()))
    }

    /// Dense block of rows `start..end` for the given columns; gaps become NaN.
    pub fn block(&self, columns: &[usize], start: usize, end: usize) -> DMatrix<f64> {
        DMatrix::from_fn(end - start, columns.len(), |r, c| {
            self.rows[start + r][columns[c]].unwrap_or(f64::NAN)
        })
    }

    /// Median spacing of the timeline.
    pub fn bar_interval(&self) -> Result<TimeDelta, BacktestError> {
        if self.timestamps.len() < 2 {
            return Err(BacktestError::CurveTooShort(self.timestamps.len()));
        }
        let mut gaps: Vec<TimeDelta> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort();
        Ok(gaps[(gaps.len() - 1) / 2])
    }
}

fn check_timeline(timeline: &[DateTime<Utc>]) -> Result<(), BacktestError> {
    match timeline.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(BacktestError::UnorderedTimeline(i + 1)),
        None => Ok(()),
    }
}

/// Mid prices of one contract on a shared timeline; `None` where it did not quote.
pub type PriceSeries = (String, Vec<Option<f64>>);

/// Builds simple returns from mid series aligned to `timeline`. A missing mid
/// at either end of a bar leaves that return absent and is reported as a gap.
pub fn compute_returns(
    series: &[PriceSeries],
    timeline: &[DateTime<Utc>],
) -> Result<(ReturnMatrix, Vec<Event>), BacktestError> {
    check_timeline(timeline)?;
    let t = timeline.len();
    for (ric, mids) in series {
        if mids.len() != t {
            return Err(BacktestError::LengthMismatch {
                ric: ric.clone(),
                got: mids.len(),
                expected: t,
            });
        }
        for (j, m) in mids.iter().enumerate() {
            if let Some(m) = m {
                if !(*m > 0.0) {
                    return Err(BacktestError::NonPositiveMid {
                        ric: ric.clone(),
                        time: timeline[j],
                        mid: *m,
                    });
                }
            }
        }
    }
    let mut events = Vec::new();
    let rows: Vec<Vec<Option<f64>>> = (0..t.saturating_sub(1))
        .map(|j| {
            series
                .iter()
                .map(|(ric, mids)| match (mids[j], mids[j + 1]) {
                    (Some(a), Some(b)) => Some(b / a - 1.0),
                    (Some(_), None) => {
                        events.push(Event {
                            time: timeline[j],
                            kind: EventKind::Gap,
                            detail: format!("{ric}: no mid at next bar"),
                        });
                        None
                    }
                    _ => None,
                })
                .collect()
        })
        .collect();
    let assets = series.iter().map(|(r, _)| r.clone()).collect();
    Ok((ReturnMatrix::new(timeline.to_vec(), assets, rows)?, events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cumulative_return: f64,
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    /// Absent when volatility is zero.
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub bars_per_year: f64,
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            worst = worst.max((peak - e) / peak);
        }
    }
    worst
}

/// Per-bar returns are annualized with `365 days / bar_interval` bars a year;
/// `annual_rate` is subtracted from the annualized mean for the Sharpe ratio.
pub fn summarize(
    equity: &[f64],
    bar_interval: TimeDelta,
    annual_rate: f64,
) -> Result<Metrics, BacktestError> {
    if equity.len() < 2 {
        return Err(BacktestError::CurveTooShort(equity.len()));
    }
    let secs = bar_interval.as_seconds_f64();
    if !(secs > 0.0) {
        return Err(BacktestError::InvalidInput {
            field: "bar_interval",
            reason: "must be positive".into(),
        });
    }
    let bars_per_year = 365.0 * 86_400.0 / secs;
    let rets: Vec<f64> = equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let n = rets.len() as f64;
    let mean = rets.iter().sum::<f64>() / n;
    let var = if rets.len() > 1 {
        rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let vol = var.sqrt() * bars_per_year.sqrt();
    let annualized_return = mean * bars_per_year;
    Ok(Metrics {
        cumulative_return: equity[equity.len() - 1] / equity[0] - 1.0,
        annualized_return,
        annualized_volatility: vol,
        sharpe: (vol > 0.0).then(|| (annualized_return - annual_rate) / vol),
        max_drawdown: max_drawdown(equity),
        bars_per_year,
    })
}

/// Weights in force over one bar, before that bar's returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarWeights {
    pub time: DateTime<Utc>,
    pub weights: Vec<(String, f64)>,
    pub cash: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rebalance {
    pub time: DateTime<Utc>,
    pub weights: WeightVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub timestamps: Vec<DateTime<Utc>>,
    /// One value per timestamp, starting at 1.
    pub equity: Vec<f64>,
    pub bar_weights: Vec<BarWeights>,
    pub rebalances: Vec<Rebalance>,
    pub events: Vec<Event>,
    pub metrics: Metrics,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn timeline(n: usize) -> Vec<DateTime<Utc>> {
        let t0 = Utc.with_ymd_and_hms(2023, 10, 2, 14, 0, 0).unwrap();
        (0..n).map(|i| t0 + TimeDelta::hours(i as i64)).collect()
    }

    #[test]
    fn returns_arithmetic() {
        let tl = timeline(3);
        let series = vec![
            ("a".to_string(), vec![Some(2.0), Some(2.2), Some(2.2)]),
            ("b".to_string(), vec![Some(1.0), None, Some(1.0)]),
        ];
        let (m, events) = compute_returns(&series, &tl).unwrap();
        assert_eq!(m.periods(), 2);
        assert!((m.rows[0][0].unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(m.rows[1][0], Some(0.0));
        assert_eq!(m.rows[0][1], None);
        assert_eq!(m.rows[1][1], None);
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn non_positive_mid() {
        let series = vec![("a".to_string(), vec![Some(1.0), Some(0.0)])];
        assert!(matches!(
            compute_returns(&series, &timeline(2)),
            Err(BacktestError::NonPositiveMid { .. })
        ));
        let mut tl = timeline(2);
        tl.swap(0, 1);
        let series = vec![("a".to_string(), vec![Some(1.0), Some(1.0)])];
        assert!(matches!(
            compute_returns(&series, &tl),
            Err(BacktestError::UnorderedTimeline(1))
        ));
    }

    #[test]
    fn summary_cases() {
        let hour = TimeDelta::hours(1);
        let flat = summarize(&[1.0, 1.0, 1.0], hour, 0.05).unwrap();
        assert_eq!(flat.cumulative_return, 0.0);
        assert_eq!(flat.annualized_volatility, 0.0);
        assert_eq!(flat.max_drawdown, 0.0);
        assert_eq!(flat.sharpe, None);

        let dd = summarize(&[1.0, 1.1, 0.99], hour, 0.0).unwrap();
        assert!((dd.max_drawdown - 0.1).abs() < 1e-12);
        assert!((dd.cumulative_return + 0.01).abs() < 1e-12);
        assert_eq!(dd.bars_per_year, 8760.0);

        assert_eq!(max_drawdown(&[1.0, 1.2, 1.3, 2.0]), 0.0);
        assert!(matches!(
            summarize(&[1.0], hour, 0.0),
            Err(BacktestError::CurveTooShort(1))
        ));
    }

    #[test]
    fn sharpe_hand() {
        // per-bar returns 0.01, -0.01 with daily bars
        let eq = [1.0, 1.01, 1.01 * 0.99];
        let m = summarize(&eq, TimeDelta::days(1), 0.0).unwrap();
        let sd = (2.0 * 0.01f64.powi(2)).sqrt();
        assert!((m.annualized_volatility - sd * 365f64.sqrt()).abs() < 1e-12);
        assert!(m.sharpe.unwrap().abs() < 1e-9);
    }
}
