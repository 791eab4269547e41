//! Bar-by-bar simulation with drifting weights and a cash leg.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    summarize, BacktestError, BacktestReport, BarWeights, Event, EventKind, Rebalance, ReturnMatrix,
};
use crate::optimizer::{
    estimate_moments, shrink_covariance, solve_box_constrained, solve_markowitz, solve_robust,
    solve_with_riskfree, MomentEstimate, OptimizerError, PortfolioConstraints, WeightVector,
};
use crate::universe::Universe;

/// Implied volatility per (decision time, contract), for the IV cap.
pub type IvLookup = HashMap<(DateTime<Utc>, String), f64>;

/// Weight problem solved at each rebalance. Static targets default to the
/// equal-weight mean of the estimation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    BoxConstrained {
        lambda: f64,
        constraints: PortfolioConstraints,
    },
    Markowitz {
        target: Option<f64>,
    },
    /// `rf` is per bar; cash earns it.
    RiskFree {
        rf: f64,
        target: Option<f64>,
    },
    Shrinkage {
        delta: f64,
        target: Option<f64>,
    },
    Robust {
        kappa: f64,
        target: Option<f64>,
    },
    Fixed {
        weights: Vec<f64>,
    },
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::BoxConstrained { .. } => "dynamic",
            Solver::Markowitz { .. } => "markowitz",
            Solver::RiskFree { .. } => "riskfree",
            Solver::Shrinkage { .. } => "shrinkage",
            Solver::Robust { .. } => "robust",
            Solver::Fixed { .. } => "fixed",
        }
    }

    pub fn cash_return(&self) -> f64 {
        match self {
            Solver::RiskFree { rf, .. } => *rf,
            _ => 0.0,
        }
    }

    pub fn needs_ivs(&self) -> bool {
        matches!(self, Solver::BoxConstrained { constraints, .. } if constraints.iv_cap.is_some())
    }

    pub fn solve(
        &self,
        m: &MomentEstimate,
        ivs: Option<&[f64]>,
    ) -> Result<WeightVector, OptimizerError> {
        let target = |t: &Option<f64>| t.unwrap_or_else(|| m.equal_weight_mean());
        match self {
            Solver::BoxConstrained {
                lambda,
                constraints,
            } => solve_box_constrained(m, constraints, ivs, *lambda).map(|s| s.weights),
            Solver::Markowitz { target: t } => solve_markowitz(m, target(t)),
            Solver::RiskFree { rf, target: t } => solve_with_riskfree(m, *rf, target(t)),
            Solver::Shrinkage { delta, target: t } => {
                let shrunk = m.with_covariance(shrink_covariance(&m.covariance, *delta)?);
                solve_markowitz(&shrunk, target(t))
            }
            Solver::Robust { kappa, target: t } => solve_robust(m, *kappa, target(t)),
            Solver::Fixed { weights } => {
                if weights.len() != m.n() {
                    return Err(OptimizerError::InvalidInput {
                        field: "weights",
                        reason: format!("expected {} weights, got {}", m.n(), weights.len()),
                    });
                }
                Ok(WeightVector {
                    universe: m.assets.clone(),
                    weights: weights.clone(),
                    cash: 1.0 - weights.iter().sum::<f64>(),
                    objective_value: m.mean_of(weights),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicConfig {
    /// Trailing estimation window in bars.
    pub window: usize,
    pub rebalance_every: usize,
    pub solver: Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticParams {
    /// Return rows used for estimation.
    pub estimation: Range<usize>,
    /// Bar at which the weights are put on.
    pub start: usize,
}

struct Decision {
    holdings: Vec<(usize, f64)>,
    cash: f64,
}

struct Path {
    equity: Vec<f64>,
    bar_weights: Vec<BarWeights>,
    events: Vec<Event>,
}

/// Weights drift with returns between decisions; a holding without a return
/// for a bar is moved to cash, which earns `cash_return` per bar.
fn simulate(
    returns: &ReturnMatrix,
    decisions: &BTreeMap<usize, Decision>,
    cash_return: f64,
) -> Result<Path, BacktestError> {
    let periods = returns.periods();
    let mut equity = Vec::with_capacity(periods + 1);
    equity.push(1.0);
    let mut bar_weights = Vec::with_capacity(periods);
    let mut events = Vec::new();
    let mut holdings: Vec<(usize, f64)> = Vec::new();
    let mut cash = 1.0;
    for j in 0..periods {
        let time = returns.timestamps[j];
        if let Some(d) = decisions.get(&j) {
            holdings = d.holdings.clone();
            cash = d.cash;
        }
        let row = &returns.rows[j];
        holdings.retain(|&(i, w)| {
            if row[i].is_none() && w != 0.0 {
                cash += w;
                events.push(Event {
                    time,
                    kind: EventKind::ToCash,
                    detail: format!("{}: weight {w} moved to cash", returns.assets[i]),
                });
                false
            } else {
                true
            }
        });
        bar_weights.push(BarWeights {
            time,
            weights: holdings
                .iter()
                .map(|&(i, w)| (returns.assets[i].clone(), w))
                .collect(),
            cash,
        });
        let mut r_p = 0.0;
        for &(i, w) in &holdings {
            r_p += w * row[i].unwrap_or(0.0);
        }
        r_p += cash * cash_return;
        let growth = 1.0 + r_p;
        if !(growth > 0.0) {
            return Err(BacktestError::Ruin(time));
        }
        equity.push(equity[j] * growth);
        for (i, w) in holdings.iter_mut() {
            *w = *w * (1.0 + row[*i].unwrap_or(0.0)) / growth;
        }
        cash = cash * (1.0 + cash_return) / growth;
    }
    Ok(Path {
        equity,
        bar_weights,
        events,
    })
}

fn universe_map(universes: &[Universe]) -> BTreeMap<DateTime<Utc>, &Universe> {
    universes.iter().map(|u| (u.decision_time, u)).collect()
}

fn finish(
    strategy: &str,
    returns: &ReturnMatrix,
    path: Path,
    rebalances: Vec<Rebalance>,
    mut events: Vec<Event>,
    annual_rate: f64,
) -> Result<BacktestReport, BacktestError> {
    let metrics = summarize(&path.equity, returns.bar_interval()?, annual_rate)?;
    events.extend(path.events);
    events.sort_by_key(|e| e.time);
    Ok(BacktestReport {
        strategy: strategy.to_string(),
        timestamps: returns.timestamps.clone(),
        equity: path.equity,
        bar_weights: path.bar_weights,
        rebalances,
        events,
        metrics,
    })
}

/// Long the top k at `+1/(2k)` and short the bottom k at `-1/(2k)`, refreshed
/// every bar from that bar's universe.
pub fn run_long_short(
    universes: &[Universe],
    returns: &ReturnMatrix,
    annual_rate: f64,
) -> Result<BacktestReport, BacktestError> {
    let by_time = universe_map(universes);
    let mut decisions = BTreeMap::new();
    let mut rebalances = Vec::new();
    for j in 0..returns.periods() {
        let time = returns.timestamps[j];
        let u = by_time
            .get(&time)
            .ok_or(BacktestError::MissingUniverse(time))?;
        let size = 1.0 / (2.0 * u.k() as f64);
        let mut holdings = Vec::with_capacity(2 * u.k());
        let mut rics = Vec::with_capacity(2 * u.k());
        for (top, bottom) in u.top.iter().zip(&u.bottom) {
            holdings.push((returns.index_of(top)?, size));
            holdings.push((returns.index_of(bottom)?, -size));
            rics.push(top.clone());
            rics.push(bottom.clone());
        }
        let weights: Vec<f64> = holdings.iter().map(|h| h.1).collect();
        let cash = 1.0 - weights.iter().sum::<f64>();
        rebalances.push(Rebalance {
            time,
            weights: WeightVector {
                universe: rics,
                weights,
                cash,
                objective_value: 0.0,
            },
        });
        decisions.insert(j, Decision { holdings, cash });
    }
    let path = simulate(returns, &decisions, 0.0)?;
    finish(
        "long_short",
        returns,
        path,
        rebalances,
        Vec::new(),
        annual_rate,
    )
}

fn solve_on(
    returns: &ReturnMatrix,
    rics: &[String],
    rows: Range<usize>,
    solver: &Solver,
    ivs: Option<Vec<f64>>,
) -> Result<(WeightVector, Vec<usize>), OptimizerError> {
    let columns: Vec<usize> = rics
        .iter()
        .map(|r| returns.index_of(r).expect("checked by caller"))
        .collect();
    let block = returns.block(&columns, rows.start, rows.end);
    let moments = estimate_moments(&block, rows.len())?.with_assets(rics.to_vec());
    Ok((solver.solve(&moments, ivs.as_deref())?, columns))
}

fn decision_of(w: &WeightVector, columns: &[usize]) -> Decision {
    Decision {
        holdings: columns
            .iter()
            .copied()
            .zip(w.weights.iter().copied())
            .collect(),
        cash: w.cash,
    }
}

fn lookup_ivs(
    solver: &Solver,
    ivs: Option<&IvLookup>,
    time: DateTime<Utc>,
    rics: &[String],
) -> Result<Option<Vec<f64>>, OptimizerError> {
    if !solver.needs_ivs() {
        return Ok(None);
    }
    let table = ivs.ok_or_else(|| OptimizerError::InvalidInput {
        field: "ivs",
        reason: "IV cap set but no IVs supplied".into(),
    })?;
    rics.iter()
        .map(|r| {
            table
                .get(&(time, r.clone()))
                .copied()
                .ok_or_else(|| OptimizerError::InvalidInput {
                    field: "ivs",
                    reason: format!("no implied volatility for {r}"),
                })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Re-solves on the trailing window every `rebalance_every` bars, starting at
/// bar `window`, over that bar's top and bottom contracts. The book is in cash
/// until the first successful solve. A failed solve keeps the drifted weights
/// and is logged; infeasible bounds for the universe size are an error.
pub fn run_dynamic(
    universes: &[Universe],
    returns: &ReturnMatrix,
    config: &DynamicConfig,
    ivs: Option<&IvLookup>,
    annual_rate: f64,
) -> Result<BacktestReport, BacktestError> {
    if config.rebalance_every == 0 {
        return Err(BacktestError::InvalidInput {
            field: "rebalance_every",
            reason: "must be at least 1".into(),
        });
    }
    if config.window >= returns.periods() {
        return Err(OptimizerError::WindowTooLarge {
            window: config.window,
            available: returns.periods(),
        }
        .into());
    }
    let by_time = universe_map(universes);
    let mut decisions = BTreeMap::new();
    let mut rebalances = Vec::new();
    let mut events = Vec::new();
    for b in (config.window..returns.periods()).step_by(config.rebalance_every) {
        let time = returns.timestamps[b];
        let u = by_time
            .get(&time)
            .ok_or(BacktestError::MissingUniverse(time))?;
        let rics: Vec<String> = u.members().cloned().collect();
        for r in &rics {
            returns.index_of(r)?;
        }
        if let Solver::BoxConstrained { constraints, .. } = &config.solver {
            constraints.validate(rics.len())?;
        }
        let solved = lookup_ivs(&config.solver, ivs, time, &rics)
            .and_then(|iv| solve_on(returns, &rics, b - config.window..b, &config.solver, iv));
        match solved {
            Ok((w, columns)) => {
                decisions.insert(b, decision_of(&w, &columns));
                rebalances.push(Rebalance { time, weights: w });
            }
            Err(e) => events.push(Event {
                time,
                kind: EventKind::SolverFallback,
                detail: format!("{e}; holding previous weights"),
            }),
        }
    }
    let path = simulate(returns, &decisions, config.solver.cash_return())?;
    finish(
        config.solver.name(),
        returns,
        path,
        rebalances,
        events,
        annual_rate,
    )
}

/// One solve over the estimation rows; the weights are put on at `start` and
/// then left to drift.
pub fn run_static(
    returns: &ReturnMatrix,
    rics: &[String],
    solver: &Solver,
    params: &StaticParams,
    ivs: Option<&[f64]>,
    annual_rate: f64,
) -> Result<BacktestReport, BacktestError> {
    let periods = returns.periods();
    if params.estimation.end > periods || params.estimation.is_empty() {
        return Err(BacktestError::InvalidInput {
            field: "estimation",
            reason: format!("rows {:?} outside 0..{periods}", params.estimation),
        });
    }
    if params.start >= periods {
        return Err(BacktestError::InvalidInput {
            field: "start",
            reason: format!("bar {} outside 0..{periods}", params.start),
        });
    }
    for r in rics {
        returns.index_of(r)?;
    }
    let (w, columns) = solve_on(
        returns,
        rics,
        params.estimation.clone(),
        solver,
        ivs.map(<[f64]>::to_vec),
    )?;
    let time = returns.timestamps[params.start];
    let decisions = BTreeMap::from([(params.start, decision_of(&w, &columns))]);
    let path = simulate(returns, &decisions, solver.cash_return())?;
    finish(
        solver.name(),
        returns,
        path,
        vec![Rebalance { time, weights: w }],
        Vec::new(),
        annual_rate,
    )
}
