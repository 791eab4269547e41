//! Report bundle: report.json, equity.csv, weights.csv and events.log.

use std::io;
use std::path::Path;

use serde::Serialize;

use super::{BacktestReport, EventKind, Metrics};
use crate::market_data::format_timestamp;
use crate::output::{atomic_write, write_csv};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary<'a, C: Serialize> {
    pub strategy: &'a str,
    pub metrics: &'a Metrics,
    pub bars: usize,
    pub final_equity: f64,
    pub rebalances: usize,
    pub solver_fallbacks: usize,
    pub transaction_costs: &'static str,
    pub config: &'a C,
}

/// Writes the four report files into `dir`, each atomically. `config` is
/// echoed verbatim into report.json.
pub fn write_bundle<C: Serialize>(
    dir: &Path,
    report: &BacktestReport,
    config: &C,
) -> io::Result<()> {
    let summary = ReportSummary {
        strategy: &report.strategy,
        metrics: &report.metrics,
        bars: report.timestamps.len(),
        final_equity: *report.equity.last().unwrap_or(&1.0),
        rebalances: report.rebalances.len(),
        solver_fallbacks: report
            .events
            .iter()
            .filter(|e| e.kind == EventKind::SolverFallback)
            .count(),
        transaction_costs: "excluded",
        config,
    };
    atomic_write(&dir.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    write_csv(
        &dir.join("equity.csv"),
        &["timestamp", "equity"],
        report
            .timestamps
            .iter()
            .zip(&report.equity)
            .map(|(t, e)| vec![format_timestamp(t), e.to_string()]),
    )?;
    write_csv(
        &dir.join("weights.csv"),
        &["timestamp", "ric", "weight"],
        report.bar_weights.iter().flat_map(|b| {
            let t = format_timestamp(&b.time);
            b.weights
                .iter()
                .map(move |(r, w)| vec![t.clone(), r.clone(), w.to_string()])
        }),
    )?;
    atomic_write(&dir.join("events.log"), |w| {
        for e in &report.events {
            writeln!(w, "{} {} {}", format_timestamp(&e.time), e.kind, e.detail)?;
        }
        Ok(())
    })
}
