use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{ContractType, Exercise, PricingError, PricingInputs};

fn std_normal() -> Normal {
    Normal::standard()
}

fn d1_d2(inputs: &PricingInputs) -> (f64, f64) {
    let sqrt_t = inputs.time_to_maturity.sqrt();
    let vol_sqrt_t = inputs.volatility * sqrt_t;
    let d1 = ((inputs.spot / inputs.strike).ln()
        + (inputs.rate - inputs.dividend_yield + 0.5 * inputs.volatility * inputs.volatility)
            * inputs.time_to_maturity)
        / vol_sqrt_t;
    (d1, d1 - vol_sqrt_t)
}

fn check(inputs: &PricingInputs) -> Result<(), PricingError> {
    if inputs.exercise != Exercise::European {
        return Err(PricingError::NotEuropean);
    }
    inputs.validate()
}

/// Lognormal closed form with continuous dividend yield. `steps` is ignored.
pub fn black_scholes_price(inputs: &PricingInputs) -> Result<f64, PricingError> {
    check(inputs)?;
    let n = std_normal();
    let (d1, d2) = d1_d2(inputs);
    let t = inputs.time_to_maturity;
    let fwd_s = inputs.spot * (-inputs.dividend_yield * t).exp();
    let disc_k = inputs.strike * (-inputs.rate * t).exp();
    Ok(match inputs.contract_type {
        ContractType::Call => fwd_s * n.cdf(d1) - disc_k * n.cdf(d2),
        ContractType::Put => disc_k * n.cdf(-d2) - fwd_s * n.cdf(-d1),
    })
}

/// Differentiated closed form. Theta is `dV/dt` in calendar time (per year),
/// vega and rho are per unit of volatility and rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormGreeks {
    pub delta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub vega: f64,
    pub rho: f64,
}

pub fn black_scholes_greeks(inputs: &PricingInputs) -> Result<ClosedFormGreeks, PricingError> {
    check(inputs)?;
    let n = std_normal();
    let (d1, d2) = d1_d2(inputs);
    let t = inputs.time_to_maturity;
    let (s, k, r, q, sigma) = (
        inputs.spot,
        inputs.strike,
        inputs.rate,
        inputs.dividend_yield,
        inputs.volatility,
    );
    let eq = (-q * t).exp();
    let er = (-r * t).exp();
    let pdf = n.pdf(d1);
    let gamma = eq * pdf / (s * sigma * t.sqrt());
    let vega = s * eq * pdf * t.sqrt();
    let decay = -s * eq * pdf * sigma / (2.0 * t.sqrt());
    Ok(match inputs.contract_type {
        ContractType::Call => ClosedFormGreeks {
            delta: eq * n.cdf(d1),
            gamma,
            theta: decay - r * k * er * n.cdf(d2) + q * s * eq * n.cdf(d1),
            vega,
            rho: k * t * er * n.cdf(d2),
        },
        ContractType::Put => ClosedFormGreeks {
            delta: -eq * n.cdf(-d1),
            gamma,
            theta: decay + r * k * er * n.cdf(-d2) - q * s * eq * n.cdf(-d1),
            vega,
            rho: -k * t * er * n.cdf(-d2),
        },
    })
}
