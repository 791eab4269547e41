//! Option valuation on a recombining Cox-Ross-Rubinstein lattice, plus the
//! lognormal closed form used as a convergence oracle for European exercise.

mod black_scholes;
mod lattice;

pub use black_scholes::{black_scholes_greeks, black_scholes_price, ClosedFormGreeks};
pub use lattice::{build_lattice, price_option, Lattice, RootSummary};

pub(crate) use lattice::root_summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lattice step count used by pipeline runs unless configured otherwise.
pub const DEFAULT_PIPELINE_STEPS: usize = 500;
/// Lattice step count used by the oracle and acceptance checks.
pub const DEFAULT_ACCEPTANCE_STEPS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("invalid pricing input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },
    #[error(
        "risk-neutral probability {q_rn} outside (0, 1); step size too large for sigma and rates"
    )]
    DegenerateProbability { q_rn: f64 },
    #[error("closed-form price requires European exercise")]
    NotEuropean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContractType {
    Call,
    Put,
}

impl ContractType {
    /// Accepts `C`/`P` and `Call`/`Put`, case-insensitively.
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "c" | "call" => Some(Self::Call),
            "p" | "put" => Some(Self::Put),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::Call => "C",
            Self::Put => "P",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exercise {
    American,
    European,
}

/// Full state for one valuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingInputs {
    pub spot: f64,
    pub strike: f64,
    /// Years.
    pub time_to_maturity: f64,
    /// Continuously compounded, annualized.
    pub rate: f64,
    /// Continuous, annualized.
    pub dividend_yield: f64,
    pub volatility: f64,
    pub steps: usize,
    pub contract_type: ContractType,
    pub exercise: Exercise,
}

impl PricingInputs {
    pub fn validate(&self) -> Result<(), PricingError> {
        fn positive(field: &'static str, v: f64) -> Result<(), PricingError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PricingError::InvalidInput {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        positive("spot", self.spot)?;
        positive("strike", self.strike)?;
        positive("time_to_maturity", self.time_to_maturity)?;
        positive("volatility", self.volatility)?;
        if !self.rate.is_finite() {
            return Err(PricingError::InvalidInput {
                field: "rate",
                reason: "must be finite".into(),
            });
        }
        if !self.dividend_yield.is_finite() {
            return Err(PricingError::InvalidInput {
                field: "dividend_yield",
                reason: "must be finite".into(),
            });
        }
        if self.steps == 0 {
            return Err(PricingError::InvalidInput {
                field: "steps",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.time_to_maturity / self.steps as f64
    }

    pub fn with_spot(mut self, spot: f64) -> Self {
        self.spot = spot;
        self
    }

    pub fn with_volatility(mut self, volatility: f64) -> Self {
        self.volatility = volatility;
        self
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_maturity(mut self, time_to_maturity: f64) -> Self {
        self.time_to_maturity = time_to_maturity;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_exercise(mut self, exercise: Exercise) -> Self {
        self.exercise = exercise;
        self
    }

    pub fn with_contract_type(mut self, contract_type: ContractType) -> Self {
        self.contract_type = contract_type;
        self
    }

    pub fn intrinsic(&self) -> f64 {
        payoff(self.spot, self.strike, self.contract_type)
    }
}

/// Intrinsic value of immediate exercise.
#[inline]
pub fn payoff(spot: f64, strike: f64, contract_type: ContractType) -> f64 {
    match contract_type {
        ContractType::Call => (spot - strike).max(0.0),
        ContractType::Put => (strike - spot).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_cases() {
        assert_eq!(payoff(110.0, 100.0, ContractType::Call), 10.0);
        assert_eq!(payoff(110.0, 100.0, ContractType::Put), 0.0);
        assert_eq!(payoff(100.0, 100.0, ContractType::Call), 0.0);
        assert_eq!(payoff(100.0, 100.0, ContractType::Put), 0.0);
    }

    #[test]
    fn contract_type_parsing() {
        assert_eq!(ContractType::parse("c"), Some(ContractType::Call));
        assert_eq!(ContractType::parse("PUT"), Some(ContractType::Put));
        assert_eq!(ContractType::parse(" Call "), Some(ContractType::Call));
        assert_eq!(ContractType::parse("x"), None);
    }

    #[test]
    fn validation_rejects_non_positive_fields() {
        let base = PricingInputs {
            spot: 100.0,
            strike: 100.0,
            time_to_maturity: 1.0,
            rate: 0.05,
            dividend_yield: 0.0,
            volatility: 0.2,
            steps: 10,
            contract_type: ContractType::Call,
            exercise: Exercise::American,
        };
        assert!(base.validate().is_ok());
        assert!(base.with_spot(0.0).validate().is_err());
        assert!(base.with_volatility(-0.1).validate().is_err());
        assert!(base.with_maturity(0.0).validate().is_err());
        assert!(base.with_steps(0).validate().is_err());
    }
}
