//! Implied volatility by Newton-Raphson on the lattice price, guarded by a
//! maintained bisection bracket.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::{price_option, ContractType, Exercise, PricingError, PricingInputs};

pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvError {
    #[error("market price {price} outside static bounds [{lower}, {upper}]")]
    ArbitrageViolation { price: f64, lower: f64, upper: f64 },
    #[error("market price {price} has no time value over the floor {floor}; volatility is not identifiable")]
    NoTimeValue { price: f64, floor: f64 },
    #[error("weights and implied vols differ in length ({weights} vs {ivs})")]
    DimensionMismatch { weights: usize, ivs: usize },
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    Newton,
    Bisection,
    Hybrid,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::Newton => "newton",
            SolveMethod::Bisection => "bisection",
            SolveMethod::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvSolution {
    pub sigma: f64,
    /// Number of lattice price evaluations at full step count.
    pub iterations: usize,
    pub converged: bool,
    pub method: SolveMethod,
    /// model price minus market price at `sigma`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMode {
    /// Newton steps inside a maintained bisection bracket.
    Hybrid,
    /// Bare Newton iteration, only clamped to the volatility range.
    NewtonOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedRule {
    /// [`initial_guess`].
    BrennerSubrahmanyam,
    /// [`corrado_miller_guess`].
    CorradoMiller,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvOptions {
    pub mode: SolveMode,
    pub seed: SeedRule,
    pub price_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub vega_floor: f64,
    /// Lattice steps used for the derivative during iteration.
    pub derivative_steps: usize,
    pub vol_bump: f64,
}

impl Default for IvOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Hybrid,
            seed: SeedRule::CorradoMiller,
            price_tolerance: 1e-6,
            step_tolerance: 1e-8,
            max_iterations: 100,
            vega_floor: 1e-8,
            derivative_steps: 200,
            vol_bump: 1e-3,
        }
    }
}

/// Static no-arbitrage bounds for the contract's market price.
pub fn price_bounds(inputs: &PricingInputs) -> (f64, f64) {
    let t = inputs.time_to_maturity;
    let fwd_s = inputs.spot * (-inputs.dividend_yield * t).exp();
    let disc_k = inputs.strike * (-inputs.rate * t).exp();
    let (european_floor, cap) = match inputs.contract_type {
        ContractType::Call => ((fwd_s - disc_k).max(0.0), inputs.spot),
        ContractType::Put => ((disc_k - fwd_s).max(0.0), inputs.strike),
    };
    match inputs.exercise {
        Exercise::American => (european_floor.max(inputs.intrinsic()), cap),
        Exercise::European => match inputs.contract_type {
            ContractType::Call => (european_floor, fwd_s),
            ContractType::Put => (european_floor, disc_k),
        },
    }
}

/// Brenner-Subrahmanyam seed clamped to [0.05, 1.0].
pub fn initial_guess(market_price: f64, inputs: &PricingInputs) -> f64 {
    let raw =
        market_price * (2.0 * std::f64::consts::PI / inputs.time_to_maturity).sqrt() / inputs.spot;
    if raw.is_nan() {
        return 0.05;
    }
    raw.clamp(0.05, 1.0)
}

/// Moneyness-aware extension of [`initial_guess`]; identical to it when the
/// discounted strike equals the dividend-adjusted spot. Puts are mapped to
/// calls through European parity. Clamped to [0.05, 1.0].
pub fn corrado_miller_guess(market_price: f64, inputs: &PricingInputs) -> f64 {
    let t = inputs.time_to_maturity;
    let s = inputs.spot * (-inputs.dividend_yield * t).exp();
    let x = inputs.strike * (-inputs.rate * t).exp();
    let call = match inputs.contract_type {
        ContractType::Call => market_price,
        ContractType::Put => market_price + s - x,
    };
    let half_gap = 0.5 * (s - x);
    let disc = (call - half_gap).powi(2) - (s - x).powi(2) / std::f64::consts::PI;
    let raw = (2.0 * std::f64::consts::PI / t).sqrt() / (s + x)
        * (call - half_gap + disc.max(0.0).sqrt());
    if raw.is_nan() {
        return 0.05;
    }
    raw.clamp(0.05, 1.0)
}

fn seed(rule: SeedRule, market_price: f64, inputs: &PricingInputs) -> f64 {
    match rule {
        SeedRule::BrennerSubrahmanyam => initial_guess(market_price, inputs),
        SeedRule::CorradoMiller => corrado_miller_guess(market_price, inputs),
    }
}

/// Weighted sum of per-contract implied vols.
pub fn portfolio_iv(weights: &[f64], ivs: &[f64]) -> Result<f64, IvError> {
    if weights.len() != ivs.len() {
        return Err(IvError::DimensionMismatch {
            weights: weights.len(),
            ivs: ivs.len(),
        });
    }
    Ok(weights.iter().zip(ivs).map(|(w, s)| w * s).sum())
}

/// Smallest volatility for which the lattice probability stays inside (0, 1)
/// at `steps`.
fn lattice_vol_floor(inputs: &PricingInputs, steps: usize) -> f64 {
    let dt = inputs.time_to_maturity / steps as f64;
    (inputs.rate - inputs.dividend_yield).abs() * dt.sqrt() * (1.0 + 1e-9)
}

pub fn implied_vol(
    market_price: f64,
    inputs: &PricingInputs,
    opts: &IvOptions,
) -> Result<IvSolution, IvError> {
    inputs.with_volatility(0.2).validate()?;
    let (lower, upper) = price_bounds(inputs);
    if !(market_price.is_finite()
        && market_price > 0.0
        && market_price >= lower
        && market_price <= upper)
    {
        return Err(IvError::ArbitrageViolation {
            price: market_price,
            lower,
            upper,
        });
    }
    if market_price - lower <= opts.price_tolerance {
        return Err(IvError::NoTimeValue {
            price: market_price,
            floor: lower,
        });
    }

    let deriv_steps = opts.derivative_steps.min(inputs.steps).max(1);
    let lo_bound = SIGMA_MIN.max(lattice_vol_floor(inputs, inputs.steps.min(deriv_steps)));
    let hi_bound = SIGMA_MAX;

    let objective = |sigma: f64| -> Result<f64, IvError> {
        Ok(price_option(&inputs.with_volatility(sigma))? - market_price)
    };
    let derivative_inputs = inputs.with_steps(deriv_steps);
    let slope = |sigma: f64| -> Result<f64, IvError> {
        let h = opts.vol_bump;
        let up = price_option(&derivative_inputs.with_volatility((sigma + h).min(hi_bound + h)))?;
        if sigma - h > lo_bound {
            let down = price_option(&derivative_inputs.with_volatility(sigma - h))?;
            Ok((up - down) / (2.0 * h))
        } else {
            let here = price_option(&derivative_inputs.with_volatility(sigma))?;
            Ok((up - here) / h)
        }
    };

    if opts.mode == SolveMode::NewtonOnly {
        return newton_only(
            market_price,
            inputs,
            opts,
            lo_bound,
            hi_bound,
            &objective,
            &slope,
        );
    }

    let (mut lo, mut hi) = (lo_bound, hi_bound);
    let (mut lo_seen, mut hi_seen) = (false, false);
    let mut sigma = seed(opts.seed, market_price, inputs).clamp(lo_bound, hi_bound);
    let mut best = (sigma, f64::INFINITY);
    let mut prev_abs = f64::INFINITY;
    let mut last_newton = false;
    let (mut newton_steps, mut bisection_steps) = (0usize, 0usize);
    let mut iterations = 0usize;

    let method = |n: usize, b: usize| match (n, b) {
        (_, 0) => SolveMethod::Newton,
        (0, _) => SolveMethod::Bisection,
        _ => SolveMethod::Hybrid,
    };

    while iterations < opts.max_iterations {
        let f = objective(sigma)?;
        iterations += 1;
        if f.abs() < best.1.abs() {
            best = (sigma, f);
        }
        if f.abs() <= opts.price_tolerance {
            return Ok(IvSolution {
                sigma,
                iterations,
                converged: true,
                method: method(newton_steps, bisection_steps),
                residual: f,
            });
        }
        if f < 0.0 {
            lo = sigma;
            lo_seen = true;
        } else {
            hi = sigma;
            hi_seen = true;
        }
        // Target lies beyond the admissible volatility range.
        if (f < 0.0 && sigma >= hi_bound) || (f > 0.0 && sigma <= lo_bound) {
            break;
        }

        let newton_allowed = !(last_newton && f.abs() >= prev_abs);
        prev_abs = f.abs();
        let mut next = None;
        if newton_allowed {
            let vega = slope(sigma)?;
            if vega >= opts.vega_floor {
                let candidate = sigma - f / vega;
                if candidate > lo && candidate < hi {
                    next = Some(candidate);
                }
            }
        }
        let candidate = match next {
            Some(c) => {
                newton_steps += 1;
                last_newton = true;
                c
            }
            None => {
                bisection_steps += 1;
                last_newton = false;
                // An unverified bracket end is probed before it is trusted.
                if !hi_seen && hi - lo <= 2.0 * opts.step_tolerance {
                    hi
                } else if !lo_seen && hi - lo <= 2.0 * opts.step_tolerance {
                    lo
                } else {
                    0.5 * (lo + hi)
                }
            }
        };

        if (candidate - sigma).abs() <= opts.step_tolerance && (last_newton || (lo_seen && hi_seen))
        {
            let f_next = objective(candidate)?;
            iterations += 1;
            if f_next.abs() < best.1.abs() {
                best = (candidate, f_next);
            }
            return Ok(IvSolution {
                sigma: best.0,
                iterations,
                converged: best.1.abs() <= opts.price_tolerance,
                method: method(newton_steps, bisection_steps),
                residual: best.1,
            });
        }
        sigma = candidate;
    }

    Ok(IvSolution {
        sigma: best.0,
        iterations,
        converged: false,
        method: method(newton_steps, bisection_steps),
        residual: best.1,
    })
}

fn newton_only(
    market_price: f64,
    inputs: &PricingInputs,
    opts: &IvOptions,
    lo_bound: f64,
    hi_bound: f64,
    objective: &dyn Fn(f64) -> Result<f64, IvError>,
    slope: &dyn Fn(f64) -> Result<f64, IvError>,
) -> Result<IvSolution, IvError> {
    let mut sigma = seed(opts.seed, market_price, inputs).clamp(lo_bound, hi_bound);
    let mut best = (sigma, f64::INFINITY);
    for iterations in 1..=opts.max_iterations {
        let f = objective(sigma)?;
        if f.abs() < best.1.abs() {
            best = (sigma, f);
        }
        let done = |converged| IvSolution {
            sigma,
            iterations,
            converged,
            method: SolveMethod::Newton,
            residual: f,
        };
        if f.abs() <= opts.price_tolerance {
            return Ok(done(true));
        }
        let vega = slope(sigma)?;
        if !(vega.abs() >= opts.vega_floor) {
            return Ok(done(false));
        }
        let next = (sigma - f / vega).clamp(lo_bound, hi_bound);
        if (next - sigma).abs() <= opts.step_tolerance {
            return Ok(done(false));
        }
        sigma = next;
    }
    Ok(IvSolution {
        sigma: best.0,
        iterations: opts.max_iterations,
        converged: false,
        method: SolveMethod::Newton,
        residual: best.1,
    })
}
