//! American option analytics and bar-data backtesting.
//!
//! The crate is organised as a pipeline: [`market_data`] parses and enriches
//! option-chain bars, [`pricing`] values contracts on a CRR lattice,
//! [`implied_vol`] inverts mid prices, [`greeks`] computes sensitivities,
//! [`universe`] ranks and selects contracts, [`optimizer`] produces weights
//! and [`backtest`] turns weights into equity curves. [`cli`] wires the
//! stages into batch commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cli;
pub mod greeks;
pub mod implied_vol;
pub mod market_data;
pub mod optimizer;
pub mod output;
pub mod pipeline;
pub mod pricing;
pub mod universe;
