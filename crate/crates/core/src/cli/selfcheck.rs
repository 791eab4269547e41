//! Built-in oracle checks, run by the `selfcheck` command.

use nalgebra::DMatrix;

use super::CliError;
use crate::backtest::{max_drawdown, run_long_short, ReturnMatrix};
use crate::greeks::{classify_region, delta_fd, delta_ms, gamma_fd, vega_fd, GreekBumps, Region};
use crate::implied_vol::{implied_vol, IvError, IvOptions};
use crate::optimizer::{
    solve_box_constrained, solve_markowitz, solve_robust, MomentEstimate, PortfolioConstraints,
};
use crate::pricing::{
    black_scholes_greeks, black_scholes_price, price_option, ContractType, Exercise, PricingInputs,
    DEFAULT_ACCEPTANCE_STEPS,
};
use crate::universe::Universe;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(usize) -> Result<String, String>;

fn base(steps: usize) -> PricingInputs {
    PricingInputs {
        spot: 100.0,
        strike: 100.0,
        time_to_maturity: 1.0,
        rate: 0.05,
        dividend_yield: 0.0,
        volatility: 0.2,
        steps,
        contract_type: ContractType::Put,
        exercise: Exercise::European,
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn lattice_convergence(n: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    for m in [0.9, 1.0, 1.1] {
        for t in [0.25, 1.0] {
            for ct in [ContractType::Call, ContractType::Put] {
                let p = base(n)
                    .with_spot(100.0 * m)
                    .with_maturity(t)
                    .with_contract_type(ct);
                worst = worst.max(
                    (price_option(&p).map_err(err)? - black_scholes_price(&p).map_err(err)?).abs(),
                );
            }
        }
    }
    if worst <= 0.01 {
        Ok(format!(
            "max |lattice - closed form| = {worst:.2e} at N = {n}"
        ))
    } else {
        Err(format!("max error {worst:.4} exceeds 0.01 at N = {n}"))
    }
}

fn put_dominance(n: usize) -> Result<String, String> {
    for m in [0.8, 1.0, 1.2] {
        let eu = base(n).with_spot(100.0 * m);
        let am = eu.with_exercise(Exercise::American);
        let (a, e) = (
            price_option(&am).map_err(err)?,
            price_option(&eu).map_err(err)?,
        );
        if a < e - 1e-12 {
            return Err(format!(
                "American put {a} below European {e} at moneyness {m}"
            ));
        }
    }
    Ok("American put >= European put".into())
}

fn call_equivalence(n: usize) -> Result<String, String> {
    let eu = base(n).with_contract_type(ContractType::Call);
    let d = (price_option(&eu.with_exercise(Exercise::American)).map_err(err)?
        - price_option(&eu).map_err(err)?)
    .abs();
    if d <= 1e-10 {
        Ok(format!("|American - European| call = {d:.1e}"))
    } else {
        Err(format!(
            "American and European calls differ by {d:.3e} with no dividend"
        ))
    }
}

fn exhaustive_paths(_: usize) -> Result<String, String> {
    let steps = 10;
    let p = base(steps).with_contract_type(ContractType::Call);
    let dt = p.time_to_maturity / steps as f64;
    let u = (p.volatility * dt.sqrt()).exp();
    let d = 1.0 / u;
    let q = (((p.rate - p.dividend_yield) * dt).exp() - d) / (u - d);
    let mut sum = 0.0;
    for path in 0u32..(1 << steps) {
        let ups = path.count_ones() as i32;
        let st = p.spot * u.powi(ups) * d.powi(steps as i32 - ups);
        sum += q.powi(ups) * (1.0 - q).powi(steps as i32 - ups) * (st - p.strike).max(0.0);
    }
    let brute = sum * (-p.rate * p.time_to_maturity).exp();
    let lattice = price_option(&p).map_err(err)?;
    if (brute - lattice).abs() <= 1e-10 {
        Ok(format!(
            "2^{steps} paths agree to {:.1e}",
            (brute - lattice).abs()
        ))
    } else {
        Err(format!("path sum {brute} vs lattice {lattice}"))
    }
}

fn iv_round_trip(n: usize) -> Result<String, String> {
    let opts = IvOptions::default();
    for (m, sigma) in [(0.9, 0.15), (1.0, 0.3), (1.1, 0.6)] {
        let p = base(n)
            .with_spot(100.0 * m)
            .with_exercise(Exercise::American)
            .with_volatility(sigma);
        let price = price_option(&p).map_err(err)?;
        let sol = implied_vol(price, &p.with_volatility(0.2), &opts).map_err(err)?;
        if !sol.converged || (sol.sigma - sigma).abs() > 1e-4 {
            return Err(format!("recovered {} for true {sigma}", sol.sigma));
        }
    }
    Ok("three contracts recovered within 1e-4".into())
}

fn iv_bounds(n: usize) -> Result<String, String> {
    match implied_vol(150.0, &base(n), &IvOptions::default()) {
        Err(IvError::ArbitrageViolation { .. }) => {
            Ok("price above the strike bound rejected".into())
        }
        other => Err(format!("expected an arbitrage violation, got {other:?}")),
    }
}

fn european_greeks(n: usize) -> Result<String, String> {
    let b = GreekBumps::default();
    let p = base(n).with_contract_type(ContractType::Call);
    let cf = black_scholes_greeks(&p).map_err(err)?;
    let dd = (delta_fd(&p, b.delta_spot).map_err(err)? - cf.delta).abs();
    let dg = (gamma_fd(&p, b.gamma_spot).map_err(err)? - cf.gamma).abs();
    let dv = (vega_fd(&p, b.vol).map_err(err)? - cf.vega).abs();
    if dd <= 1e-3 && dg <= 5e-3 && dv <= 1e-2 * cf.vega.abs().max(1.0) {
        Ok(format!("delta {dd:.1e}, gamma {dg:.1e}, vega {dv:.1e}"))
    } else {
        Err(format!(
            "delta {dd:.2e}, gamma {dg:.2e}, vega {dv:.2e} outside tolerance at N = {n}"
        ))
    }
}

fn ms_delta(n: usize) -> Result<String, String> {
    let p = base(n).with_exercise(Exercise::American);
    let gap = (delta_ms(&p).map_err(err)?
        - delta_fd(&p, GreekBumps::default().delta_spot).map_err(err)?)
    .abs();
    if gap <= 0.02 {
        Ok(format!("|ms - fd| = {gap:.1e}"))
    } else {
        Err(format!("|ms - fd| = {gap:.3}"))
    }
}

fn stopping_delta(n: usize) -> Result<String, String> {
    let p = base(n).with_exercise(Exercise::American).with_spot(50.0);
    let region = classify_region(&p).map_err(err)?;
    let d = delta_ms(&p).map_err(err)?;
    if region == Region::Stopping && d == -1.0 {
        Ok("deep in-the-money put: stopping, delta -1".into())
    } else {
        Err(format!("region {region:?}, delta {d}"))
    }
}

fn markowitz_symmetric(_: usize) -> Result<String, String> {
    let m = MomentEstimate::from_parts(
        vec![0.01, 0.01],
        DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.04]),
    )
    .map_err(err)?;
    let w = solve_markowitz(&m, 0.01).map_err(err)?;
    if w.weights == [0.5, 0.5] {
        Ok("symmetric pair splits 50/50".into())
    } else {
        Err(format!("weights {:?}", w.weights))
    }
}

fn robust_reduction(_: usize) -> Result<String, String> {
    let cov = DMatrix::from_row_slice(
        3,
        3,
        &[0.04, 0.006, 0.002, 0.006, 0.09, 0.009, 0.002, 0.009, 0.0225],
    );
    let m = MomentEstimate::from_parts(vec![0.08, 0.12, 0.05], cov).map_err(err)?;
    let a = solve_robust(&m, 0.0, 0.1).map_err(err)?;
    let b = solve_markowitz(&m, 0.1).map_err(err)?;
    let gap = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if gap <= 1e-6 {
        Ok(format!("kappa = 0 matches Markowitz to {gap:.1e}"))
    } else {
        Err(format!("gap {gap:.3e}"))
    }
}

fn box_constraints(_: usize) -> Result<String, String> {
    let cov = DMatrix::from_fn(6, 6, |i, j| {
        if i == j {
            0.02 + 0.01 * i as f64
        } else {
            0.004
        }
    });
    let m =
        MomentEstimate::from_parts(vec![0.03, 0.01, 0.05, -0.02, 0.04, 0.0], cov).map_err(err)?;
    let c = PortfolioConstraints {
        iv_cap: Some(0.3),
        ..Default::default()
    };
    let ivs = [0.5, 0.2, 0.45, 0.25, 0.4, 0.15];
    let s = solve_box_constrained(&m, &c, Some(&ivs), 1.0).map_err(err)?;
    let w = &s.weights.weights;
    let sum = w.iter().sum::<f64>();
    let iv: f64 = w.iter().zip(&ivs).map(|(a, b)| a * b).sum();
    let in_box = w
        .iter()
        .all(|v| *v >= c.lower - 1e-12 && *v <= c.upper + 1e-12);
    if (sum - 1.0).abs() <= 1e-8 && in_box && iv <= 0.3 + 1e-6 {
        Ok(format!("sum {sum:.12}, portfolio IV {iv:.6}"))
    } else {
        Err(format!("weights {w:?} violate constraints"))
    }
}

fn long_short_neutral(_: usize) -> Result<String, String> {
    let times: Vec<_> = (0..4)
        .map(|i| chrono::DateTime::from_timestamp(1_700_000_000 + 3600 * i, 0).expect("valid"))
        .collect();
    let rics: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
    let rows = vec![
        vec![Some(0.013); 6],
        vec![Some(-0.021); 6],
        vec![Some(0.4); 6],
    ];
    let returns = ReturnMatrix::new(times.clone(), rics.clone(), rows).map_err(err)?;
    let universes: Vec<Universe> = times
        .iter()
        .map(|t| Universe {
            decision_time: *t,
            top: rics[..3].to_vec(),
            bottom: rics[3..].to_vec(),
            metric_values: vec![],
        })
        .collect();
    let r = run_long_short(&universes, &returns, 0.0).map_err(err)?;
    if r.equity.iter().all(|e| *e == 1.0) {
        Ok("equal returns leave equity at 1".into())
    } else {
        Err(format!("equity {:?}", r.equity))
    }
}

fn drawdown(_: usize) -> Result<String, String> {
    let dd = max_drawdown(&[1.0, 1.1, 0.99]);
    if (dd - 0.1).abs() < 1e-12 {
        Ok("peak 1.1 to 0.99 is 10%".into())
    } else {
        Err(format!("got {dd}"))
    }
}

const CHECKS: [(&str, Check); 14] = [
    ("lattice_convergence", lattice_convergence),
    ("american_put_dominance", put_dominance),
    ("american_call_equivalence", call_equivalence),
    ("exhaustive_path_sum", exhaustive_paths),
    ("iv_round_trip", iv_round_trip),
    ("iv_arbitrage_bounds", iv_bounds),
    ("european_greeks", european_greeks),
    ("ms_delta_consistency", ms_delta),
    ("stopping_region_delta", stopping_delta),
    ("markowitz_symmetric", markowitz_symmetric),
    ("robust_reduction", robust_reduction),
    ("box_constraints", box_constraints),
    ("long_short_neutrality", long_short_neutral),
    ("max_drawdown", drawdown),
];

/// Runs every check with `steps` lattice steps (1000 when `None`).
pub fn run_checks(steps: Option<usize>) -> Vec<CheckOutcome> {
    let n = steps.unwrap_or(DEFAULT_ACCEPTANCE_STEPS);
    CHECKS
        .iter()
        .map(|(name, check)| match check(n) {
            Ok(detail) => CheckOutcome {
                name,
                passed: true,
                detail,
            },
            Err(detail) => CheckOutcome {
                name,
                passed: false,
                detail,
            },
        })
        .collect()
}

pub(super) fn cmd_selfcheck(steps: Option<usize>) -> Result<(), CliError> {
    if steps == Some(0) {
        return Err(CliError::Validation(
            "--debug-steps must be at least 1".into(),
        ));
    }
    let outcomes = run_checks(steps);
    for o in &outcomes {
        println!(
            "{:<4} {:<26} {}",
            if o.passed { "ok" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{failed} selfcheck(s) failed")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass_by_default() {
        let out = run_checks(None);
        assert!(out.len() >= 10);
        for o in &out {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn coarse_lattice_fails_convergence() {
        let out = run_checks(Some(5));
        let conv = out
            .iter()
            .find(|o| o.name == "lattice_convergence")
            .unwrap();
        assert!(!conv.passed);
    }
}
