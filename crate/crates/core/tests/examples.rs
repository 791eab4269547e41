//! Every example runs to completion.

#[path = "../examples/backtest_strategies.rs"]
mod backtest_strategies;
#[path = "../examples/chain_data.rs"]
mod chain_data;
#[path = "../examples/greeks.rs"]
mod greeks;
#[path = "../examples/implied_vol.rs"]
mod implied_vol;
#[path = "../examples/optimize_portfolios.rs"]
mod optimize_portfolios;
#[path = "../examples/price_american.rs"]
mod price_american;
#[path = "../examples/rank_universe.rs"]
mod rank_universe;
#[path = "../examples/synthetic_chain.rs"]
mod synthetic_chain;

#[test]
fn price_american_runs() {
    price_american::run().unwrap();
}

#[test]
fn implied_vol_runs() {
    implied_vol::run().unwrap();
}

#[test]
fn greeks_runs() {
    greeks::run().unwrap();
}

#[test]
fn chain_data_runs() {
    chain_data::run().unwrap();
}

#[test]
fn rank_universe_runs() {
    rank_universe::run().unwrap();
}

#[test]
fn optimize_portfolios_runs() {
    optimize_portfolios::run().unwrap();
}

#[test]
fn backtest_strategies_runs() {
    backtest_strategies::run().unwrap();
}

#[test]
fn synthetic_chain_runs() {
    synthetic_chain::run().unwrap();
}
