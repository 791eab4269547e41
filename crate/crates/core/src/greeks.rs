//! American-option sensitivities.
//!
//! Delta comes from the lattice form of the Muroi-Suda representation: the
//! payoff slope when immediate exercise is optimal at the root, otherwise a
//! discounted one-step expectation weighted by the centred log-increment.
//! Gamma, theta, vega and rho are re-pricing finite differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::{
    price_option, root_summary, ContractType, Exercise, PricingError, PricingInputs,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreeksError {
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("bump must be finite and > 0, got {0}")]
    InvalidBump(f64),
    #[error("time bump {bump} is not smaller than maturity {maturity}")]
    BumpExceedsMaturity { bump: f64, maturity: f64 },
    #[error("volatility {volatility} minus bump {bump} is not positive")]
    NegativeVolAfterBump { volatility: f64, bump: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreekSet {
    pub delta: f64,
    pub gamma: f64,
    /// Calendar-time decay per year.
    pub theta: f64,
    pub vega: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Stopping,
    Continuation,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Stopping => "stopping",
            Region::Continuation => "continuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreekBumps {
    /// Relative spot bump for delta_fd.
    pub delta_spot: f64,
    /// Relative spot bump for gamma.
    pub gamma_spot: f64,
    /// Years.
    pub time: f64,
    /// Absolute.
    pub vol: f64,
    /// Absolute.
    pub rate: f64,
}

impl Default for GreekBumps {
    fn default() -> Self {
        Self {
            delta_spot: 1e-3,
            gamma_spot: 1e-2,
            time: 1.0 / 365.0,
            vol: 1e-3,
            rate: 1e-4,
        }
    }
}

fn check_bump(bump: f64) -> Result<(), GreeksError> {
    if bump.is_finite() && bump > 0.0 {
        Ok(())
    } else {
        Err(GreeksError::InvalidBump(bump))
    }
}

/// European contracts have no stopping region; American contracts are
/// Stopping when intrinsic value is at least the root continuation value.
pub fn classify_region(inputs: &PricingInputs) -> Result<Region, GreeksError> {
    let summary = root_summary(inputs)?;
    if inputs.exercise == Exercise::American && inputs.intrinsic() >= summary.continuation {
        Ok(Region::Stopping)
    } else {
        Ok(Region::Continuation)
    }
}

/// Payoff slope with the zero-side subgradient at the strike.
fn payoff_slope(spot: f64, strike: f64, contract_type: ContractType) -> f64 {
    match contract_type {
        ContractType::Call if spot > strike => 1.0,
        ContractType::Put if spot < strike => -1.0,
        _ => 0.0,
    }
}

pub fn delta_ms(inputs: &PricingInputs) -> Result<f64, GreeksError> {
    Ok(delta_ms_with_region(inputs)?.0)
}

pub(crate) fn delta_ms_with_region(inputs: &PricingInputs) -> Result<(f64, Region), GreeksError> {
    let summary = root_summary(inputs)?;
    let stopping =
        inputs.exercise == Exercise::American && inputs.intrinsic() >= summary.continuation;
    if stopping {
        return Ok((
            payoff_slope(inputs.spot, inputs.strike, inputs.contract_type),
            Region::Stopping,
        ));
    }
    let dt = inputs.dt();
    let sqrt_dt = dt.sqrt();
    let sigma = inputs.volatility;
    let drift = (inputs.rate - inputs.dividend_yield - 0.5 * sigma * sigma) / sigma;
    let centred = drift * dt;
    let expectation = summary.q_rn * summary.step1_up * (sqrt_dt - centred)
        + (1.0 - summary.q_rn) * summary.step1_down * (-sqrt_dt - centred);
    let delta = (-inputs.rate * dt).exp() / (inputs.spot * sigma * dt) * expectation;
    Ok((delta, Region::Continuation))
}

/// Central difference in spot with a relative bump.
pub fn delta_fd(inputs: &PricingInputs, bump: f64) -> Result<f64, GreeksError> {
    check_bump(bump)?;
    let s = inputs.spot;
    let up = price_option(&inputs.with_spot(s * (1.0 + bump)))?;
    let down = price_option(&inputs.with_spot(s * (1.0 - bump)))?;
    Ok((up - down) / (2.0 * s * bump))
}

/// The spot moves in log space by a whole number of two-step lattice
/// spacings, at least `bump`, so the strike sits at the same place relative
/// to the terminal nodes in all three trees.
pub fn gamma_fd(inputs: &PricingInputs, bump: f64) -> Result<f64, GreeksError> {
    check_bump(bump)?;
    let s = inputs.spot;
    let spacing = 2.0 * inputs.volatility * inputs.dt().sqrt();
    let wanted = bump.ln_1p();
    let shift = if spacing > 0.0 && spacing.is_finite() {
        (wanted / spacing).ceil().max(1.0) * spacing
    } else {
        wanted
    };
    let (s_up, s_down) = (s * shift.exp(), s * (-shift).exp());
    let up = price_option(&inputs.with_spot(s_up))?;
    let mid = price_option(inputs)?;
    let down = price_option(&inputs.with_spot(s_down))?;
    Ok(2.0 * ((up - mid) / (s_up - s) - (mid - down) / (s - s_down)) / (s_up - s_down))
}

/// Forward difference in calendar time, per year.
pub fn theta_fd(inputs: &PricingInputs, dt_bump: f64) -> Result<f64, GreeksError> {
    check_bump(dt_bump)?;
    if dt_bump >= inputs.time_to_maturity {
        return Err(GreeksError::BumpExceedsMaturity {
            bump: dt_bump,
            maturity: inputs.time_to_maturity,
        });
    }
    let later = price_option(&inputs.with_maturity(inputs.time_to_maturity - dt_bump))?;
    let now = price_option(inputs)?;
    Ok((later - now) / dt_bump)
}

pub fn vega_fd(inputs: &PricingInputs, vol_bump: f64) -> Result<f64, GreeksError> {
    check_bump(vol_bump)?;
    let sigma = inputs.volatility;
    if sigma - vol_bump <= 0.0 {
        return Err(GreeksError::NegativeVolAfterBump {
            volatility: sigma,
            bump: vol_bump,
        });
    }
    let up = price_option(&inputs.with_volatility(sigma + vol_bump))?;
    let down = price_option(&inputs.with_volatility(sigma - vol_bump))?;
    Ok((up - down) / (2.0 * vol_bump))
}

pub fn rho_fd(inputs: &PricingInputs, rate_bump: f64) -> Result<f64, GreeksError> {
    check_bump(rate_bump)?;
    let r = inputs.rate;
    let up = price_option(&inputs.with_rate(r + rate_bump))?;
    let down = price_option(&inputs.with_rate(r - rate_bump))?;
    Ok((up - down) / (2.0 * rate_bump))
}

pub fn greek_set(inputs: &PricingInputs) -> Result<GreekSet, GreeksError> {
    Ok(greek_set_with(inputs, &GreekBumps::default())?.0)
}

/// All five Greeks plus the root region classification.
pub fn greek_set_with(
    inputs: &PricingInputs,
    bumps: &GreekBumps,
) -> Result<(GreekSet, Region), GreeksError> {
    for b in [bumps.gamma_spot, bumps.time, bumps.vol, bumps.rate] {
        check_bump(b)?;
    }
    if inputs.volatility - bumps.vol <= 0.0 {
        return Err(GreeksError::NegativeVolAfterBump {
            volatility: inputs.volatility,
            bump: bumps.vol,
        });
    }
    if bumps.time >= inputs.time_to_maturity {
        return Err(GreeksError::BumpExceedsMaturity {
            bump: bumps.time,
            maturity: inputs.time_to_maturity,
        });
    }
    let (delta, region) = delta_ms_with_region(inputs)?;
    let set = GreekSet {
        delta,
        gamma: gamma_fd(inputs, bumps.gamma_spot)?,
        theta: theta_fd(inputs, bumps.time)?,
        vega: vega_fd(inputs, bumps.vol)?,
        rho: rho_fd(inputs, bumps.rate)?,
    };
    Ok((set, region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::black_scholes_greeks;

    fn standard(contract_type: ContractType, exercise: Exercise) -> PricingInputs {
        PricingInputs {
            spot: 100.0,
            strike: 100.0,
            time_to_maturity: 1.0,
            rate: 0.05,
            dividend_yield: 0.0,
            volatility: 0.2,
            steps: 1000,
            contract_type,
            exercise,
        }
    }

    #[test]
    fn deep_itm_put_stopping_delta() {
        let inputs = PricingInputs {
            spot: 1.0,
            steps: 2000,
            ..standard(ContractType::Put, Exercise::American)
        };
        assert_eq!(classify_region(&inputs).unwrap(), Region::Stopping);
        assert_eq!(delta_ms(&inputs).unwrap(), -1.0);
        let gamma = gamma_fd(&inputs, 1e-2).unwrap();
        assert!(gamma.abs() < 1e-6, "{gamma}");
    }

    #[test]
    fn atm_call_and_otm_put_continue() {
        assert_eq!(
            classify_region(&standard(ContractType::Call, Exercise::American)).unwrap(),
            Region::Continuation
        );
        let otm_put = PricingInputs {
            spot: 120.0,
            ..standard(ContractType::Put, Exercise::American)
        };
        assert_eq!(classify_region(&otm_put).unwrap(), Region::Continuation);
    }

    #[test]
    fn ms_delta_tracks_fd_delta_for_atm_call() {
        let am = standard(ContractType::Call, Exercise::American);
        let eu = standard(ContractType::Call, Exercise::European);
        let ms = delta_ms(&am).unwrap();
        let fd = delta_fd(&eu, 1e-3).unwrap();
        assert!((ms - fd).abs() < 0.02, "ms={ms} fd={fd}");
    }

    #[test]
    fn deep_otm_put_delta_vanishes() {
        let inputs = PricingInputs {
            spot: 200.0,
            time_to_maturity: 0.1,
            ..standard(ContractType::Put, Exercise::American)
        };
        assert!(delta_ms(&inputs).unwrap().abs() < 0.01);
    }

    #[test]
    fn fd_delta_matches_closed_form_and_parity() {
        let call = standard(ContractType::Call, Exercise::European);
        let put = call.with_contract_type(ContractType::Put);
        let cf = black_scholes_greeks(&call).unwrap();
        let dc = delta_fd(&call, 1e-3).unwrap();
        let dp = delta_fd(&put, 1e-3).unwrap();
        assert!((dc - cf.delta).abs() < 1e-3, "{dc} vs {}", cf.delta);
        assert!((dc - dp - 1.0).abs() < 1e-6, "{}", dc - dp);
    }

    #[test]
    fn gamma_stable_across_step_counts() {
        let put = standard(ContractType::Put, Exercise::European);
        let cf = black_scholes_greeks(&put).unwrap().gamma;
        for steps in [100, 101, 400, 401, 1000] {
            let g = gamma_fd(&put.with_steps(steps), 1e-2).unwrap();
            assert!((g - cf).abs() < 5e-4, "N={steps}: {g} vs {cf}");
        }
    }

    #[test]
    fn european_fd_greeks_match_closed_form() {
        let call = standard(ContractType::Call, Exercise::European);
        let cf = black_scholes_greeks(&call).unwrap();
        let b = GreekBumps::default();
        let gamma = gamma_fd(&call, b.gamma_spot).unwrap();
        let theta = theta_fd(&call, b.time).unwrap();
        let vega = vega_fd(&call, b.vol).unwrap();
        let rho = rho_fd(&call, b.rate).unwrap();
        assert!(
            (gamma - cf.gamma).abs() < 5e-3,
            "gamma {gamma} vs {}",
            cf.gamma
        );
        assert!(
            ((theta - cf.theta) / cf.theta).abs() < 0.02,
            "theta {theta} vs {}",
            cf.theta
        );
        assert!((vega - cf.vega).abs() < 1e-2, "vega {vega} vs {}", cf.vega);
        assert!(rho > 0.0);
        let put_rho = rho_fd(&call.with_contract_type(ContractType::Put), b.rate).unwrap();
        assert!(put_rho < 0.0);
    }

    #[test]
    fn bump_errors() {
        let inputs = standard(ContractType::Call, Exercise::American);
        assert_eq!(delta_fd(&inputs, 0.0), Err(GreeksError::InvalidBump(0.0)));
        let short = inputs.with_maturity(1.0 / 365.0);
        assert!(matches!(
            theta_fd(&short, 1.0 / 365.0),
            Err(GreeksError::BumpExceedsMaturity { .. })
        ));
        let low_vol = inputs.with_volatility(1e-3);
        assert!(matches!(
            greek_set(&low_vol),
            Err(GreeksError::NegativeVolAfterBump { .. })
        ));
    }

    #[test]
    fn atm_theta_negative() {
        for ct in [ContractType::Call, ContractType::Put] {
            let inputs = standard(ct, Exercise::American).with_steps(300);
            assert!(theta_fd(&inputs, 1.0 / 365.0).unwrap() < 0.0);
        }
    }
}
