//! Cross-sectional ranking of contracts and top-k / bottom-k selection.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greeks::GreekSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UniverseError {
    #[error("no contract in the snapshot has the analytics required by {0}")]
    EmptySnapshot(RankingMetric),
    #[error("need at least {needed} ranked contracts for k = {k}, have {available}")]
    InsufficientContracts {
        k: usize,
        needed: usize,
        available: usize,
    },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown ranking metric `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GreekKind {
    Delta,
    Gamma,
    Theta,
    Vega,
    Rho,
}

impl GreekKind {
    pub fn of(self, g: &GreekSet) -> f64 {
        match self {
            GreekKind::Delta => g.delta,
            GreekKind::Gamma => g.gamma,
            GreekKind::Theta => g.theta,
            GreekKind::Vega => g.vega,
            GreekKind::Rho => g.rho,
        }
    }
}

/// The four Greek interactions that have a combined ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GreekPair {
    DeltaRho,
    DeltaVega,
    VegaRho,
    DeltaGamma,
}

impl GreekPair {
    pub fn components(self) -> [GreekKind; 2] {
        use GreekKind::*;
        match self {
            GreekPair::DeltaRho => [Delta, Rho],
            GreekPair::DeltaVega => [Delta, Vega],
            GreekPair::VegaRho => [Vega, Rho],
            GreekPair::DeltaGamma => [Delta, Gamma],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankingMetric {
    Iv,
    Greek(GreekKind),
    Combined(GreekPair),
}

impl RankingMetric {
    pub fn needs_greeks(self) -> bool {
        !matches!(self, RankingMetric::Iv)
    }

    pub fn name(self) -> &'static str {
        use GreekKind::*;
        match self {
            RankingMetric::Iv => "iv",
            RankingMetric::Greek(Delta) => "delta",
            RankingMetric::Greek(Gamma) => "gamma",
            RankingMetric::Greek(Theta) => "theta",
            RankingMetric::Greek(Vega) => "vega",
            RankingMetric::Greek(Rho) => "rho",
            RankingMetric::Combined(GreekPair::DeltaRho) => "delta_rho",
            RankingMetric::Combined(GreekPair::DeltaVega) => "delta_vega",
            RankingMetric::Combined(GreekPair::VegaRho) => "vega_rho",
            RankingMetric::Combined(GreekPair::DeltaGamma) => "delta_gamma",
        }
    }

    pub const ALL: [RankingMetric; 10] = [
        RankingMetric::Iv,
        RankingMetric::Greek(GreekKind::Delta),
        RankingMetric::Greek(GreekKind::Gamma),
        RankingMetric::Greek(GreekKind::Theta),
        RankingMetric::Greek(GreekKind::Vega),
        RankingMetric::Greek(GreekKind::Rho),
        RankingMetric::Combined(GreekPair::DeltaRho),
        RankingMetric::Combined(GreekPair::DeltaVega),
        RankingMetric::Combined(GreekPair::VegaRho),
        RankingMetric::Combined(GreekPair::DeltaGamma),
    ];
}

impl fmt::Display for RankingMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankingMetric {
    type Err = UniverseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s
            .trim()
            .to_ascii_lowercase()
            .split(|c: char| c == '-' || c == '&' || c == '_' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        RankingMetric::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| UniverseError::UnknownMetric(s.to_string()))
    }
}

/// Analytics available for one contract at one decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractAnalytics {
    pub ric: String,
    pub iv: Option<f64>,
    pub greeks: Option<GreekSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: DateTime<Utc>,
    pub contracts: Vec<ContractAnalytics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub time: DateTime<Utc>,
    /// Highest score first.
    pub entries: Vec<(String, f64)>,
    /// Contracts lacking the analytics the metric needs.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub decision_time: DateTime<Utc>,
    /// Highest score first.
    pub top: Vec<String>,
    /// Lowest score first.
    pub bottom: Vec<String>,
    pub metric_values: Vec<(String, f64)>,
}

impl Universe {
    pub fn k(&self) -> usize {
        self.top.len()
    }

    /// Top then bottom.
    pub fn members(&self) -> impl Iterator<Item = &String> {
        self.top.iter().chain(self.bottom.iter())
    }
}

fn raw_value(c: &ContractAnalytics, kind: Option<GreekKind>, absolute: bool) -> Option<f64> {
    let v = match kind {
        None => c.iv?,
        Some(k) => k.of(c.greeks.as_ref()?),
    };
    let v = if absolute { v.abs() } else { v };
    v.is_finite().then_some(v)
}

fn zscores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Scores every contract that has the required analytics and sorts them in
/// descending order; ties go to the lexicographically smaller identifier.
///
/// Single metrics score by raw (or absolute) value. Combined metrics score by
/// the sum of the two components' cross-sectional z-scores.
pub fn rank_by_metric(
    snapshot: &Snapshot,
    metric: RankingMetric,
    absolute: bool,
) -> Result<Ranking, UniverseError> {
    let kinds: Vec<Option<GreekKind>> = match metric {
        RankingMetric::Iv => vec![None],
        RankingMetric::Greek(k) => vec![Some(k)],
        RankingMetric::Combined(pair) => pair.components().into_iter().map(Some).collect(),
    };

    let mut rics = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let mut excluded = Vec::new();
    for c in &snapshot.contracts {
        let values: Option<Vec<f64>> = kinds.iter().map(|k| raw_value(c, *k, absolute)).collect();
        match values {
            Some(vs) => {
                rics.push(c.ric.clone());
                for (col, v) in columns.iter_mut().zip(vs) {
                    col.push(v);
                }
            }
            None => excluded.push(c.ric.clone()),
        }
    }
    if rics.is_empty() {
        return Err(UniverseError::EmptySnapshot(metric));
    }

    let scores: Vec<f64> = if kinds.len() == 1 {
        columns.pop().expect("one column")
    } else {
        let z: Vec<Vec<f64>> = columns.iter().map(|c| zscores(c)).collect();
        (0..rics.len())
            .map(|i| z.iter().map(|col| col[i]).sum())
            .collect()
    };

    let mut entries: Vec<(String, f64)> = rics.into_iter().zip(scores).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Ranking {
        time: snapshot.time,
        entries,
        excluded,
    })
}

pub fn select_top_bottom(ranked: &Ranking, k: usize) -> Result<Universe, UniverseError> {
    if k == 0 {
        return Err(UniverseError::ZeroK);
    }
    let n = ranked.entries.len();
    if n < 2 * k {
        return Err(UniverseError::InsufficientContracts {
            k,
            needed: 2 * k,
            available: n,
        });
    }
    Ok(Universe {
        decision_time: ranked.time,
        top: ranked.entries[..k].iter().map(|(r, _)| r.clone()).collect(),
        bottom: ranked.entries[n - k..]
            .iter()
            .rev()
            .map(|(r, _)| r.clone())
            .collect(),
        metric_values: ranked.entries.clone(),
    })
}
