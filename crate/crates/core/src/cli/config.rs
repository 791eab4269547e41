//! Flat TOML run configuration; command-line flags win over file values.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{CliError, Overrides};
use crate::implied_vol::IvOptions;
use crate::market_data::{LiquidityLabel, SynthConfig};
use crate::optimizer::PortfolioConstraints;
use crate::pricing::Exercise;
use crate::universe::RankingMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    LongShort,
    Dynamic,
    Markowitz,
    RiskFree,
    Shrinkage,
    Robust,
}

impl Strategy {
    fn parse(raw: &str) -> Option<Self> {
        Some(
            match raw.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "long_short" => Strategy::LongShort,
                "dynamic" => Strategy::Dynamic,
                "markowitz" => Strategy::Markowitz,
                "riskfree" | "risk_free" => Strategy::RiskFree,
                "shrinkage" => Strategy::Shrinkage,
                "robust" => Strategy::Robust,
                _ => return None,
            },
        )
    }

    pub fn is_static(self) -> bool {
        !matches!(self, Strategy::LongShort | Strategy::Dynamic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chain: Option<PathBuf>,
    pub spot: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub steps: usize,
    pub exercise: String,
    /// Flat volatility used by `price`.
    pub volatility: f64,
    pub iv_tolerance: f64,
    pub iv_max_iterations: usize,
    pub liquidity: String,
    pub metric: String,
    pub absolute: bool,
    pub k: usize,
    pub strategy: String,
    pub rebalance_every: usize,
    pub window: usize,
    pub lower: f64,
    pub upper: f64,
    pub iv_cap: Option<f64>,
    pub risk_aversion: f64,
    pub shrinkage: f64,
    pub kappa: f64,
    /// Per-bar target for static strategies; defaults to the equal-weight mean.
    pub target_return: Option<f64>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = PortfolioConstraints::default();
        Self {
            chain: None,
            spot: None,
            out: PathBuf::from("out"),
            seed: 42,
            rate: 0.05,
            dividend_yield: 0.0,
            steps: crate::pricing::DEFAULT_PIPELINE_STEPS,
            exercise: "american".into(),
            volatility: 0.2,
            iv_tolerance: IvOptions::default().price_tolerance,
            iv_max_iterations: IvOptions::default().max_iterations,
            liquidity: "liquid".into(),
            metric: "iv".into(),
            absolute: false,
            k: 3,
            strategy: "long_short".into(),
            rebalance_every: 5,
            window: 30,
            lower: c.lower,
            upper: c.upper,
            iv_cap: None,
            risk_aversion: crate::optimizer::DEFAULT_RISK_AVERSION,
            shrinkage: crate::optimizer::DEFAULT_SHRINKAGE,
            kappa: crate::optimizer::DEFAULT_KAPPA,
            target_return: None,
            synth: SynthConfig::default(),
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("config `{field}`: {reason}"))
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { cfg.$f = v.clone().into(); } )* };
        }
        take!(
            out,
            seed,
            rate,
            dividend_yield,
            steps,
            volatility,
            liquidity,
            metric,
            k,
            strategy,
            rebalance_every,
            window,
            lower,
            upper
        );
        if o.chain.is_some() {
            cfg.chain = o.chain.clone();
        }
        if o.spot.is_some() {
            cfg.spot = o.spot.clone();
        }
        if o.iv_cap.is_some() {
            cfg.iv_cap = o.iv_cap;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be finite"))
            }
        };
        finite("rate", self.rate)?;
        finite("dividend_yield", self.dividend_yield)?;
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if !(self.volatility > 0.0) || !self.volatility.is_finite() {
            return Err(invalid("volatility", "must be positive"));
        }
        if !(self.iv_tolerance > 0.0) || self.iv_max_iterations == 0 {
            return Err(invalid(
                "iv_tolerance",
                "tolerance must be positive and iv_max_iterations at least 1",
            ));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.window < 2 {
            return Err(invalid("window", "must be at least 2"));
        }
        if self.rebalance_every == 0 {
            return Err(invalid("rebalance_every", "must be at least 1"));
        }
        if !(self.lower >= 0.0 && self.lower < self.upper && self.upper <= 1.0) {
            return Err(invalid(
                "lower",
                format!(
                    "need 0 <= lower < upper <= 1, got [{}, {}]",
                    self.lower, self.upper
                ),
            ));
        }
        if let Some(cap) = self.iv_cap {
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(invalid("iv_cap", "must be positive"));
            }
        }
        if !(self.risk_aversion >= 0.0) || !self.risk_aversion.is_finite() {
            return Err(invalid("risk_aversion", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(invalid("shrinkage", "must lie in [0, 1]"));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(invalid("kappa", "must be non-negative"));
        }
        if let Some(t) = self.target_return {
            finite("target_return", t)?;
        }
        self.exercise_style()?;
        self.liquidity_label()?;
        self.ranking_metric()?;
        self.strategy_kind()?;
        Ok(())
    }

    pub fn exercise_style(&self) -> Result<Exercise, CliError> {
        match self.exercise.to_ascii_lowercase().as_str() {
            "american" => Ok(Exercise::American),
            "european" => Ok(Exercise::European),
            other => Err(invalid("exercise", format!("unknown style `{other}`"))),
        }
    }

    pub fn liquidity_label(&self) -> Result<LiquidityLabel, CliError> {
        match self.liquidity.to_ascii_lowercase().as_str() {
            "liquid" => Ok(LiquidityLabel::Liquid),
            "illiquid" => Ok(LiquidityLabel::Illiquid),
            other => Err(invalid("liquidity", format!("unknown bucket `{other}`"))),
        }
    }

    pub fn ranking_metric(&self) -> Result<RankingMetric, CliError> {
        self.metric.parse().map_err(|e| invalid("metric", e))
    }

    pub fn strategy_kind(&self) -> Result<Strategy, CliError> {
        Strategy::parse(&self.strategy).ok_or_else(|| {
            invalid("strategy", format!("`{}` is not one of long_short, dynamic, markowitz, riskfree, shrinkage, robust", self.strategy))
        })
    }

    pub fn constraints(&self) -> PortfolioConstraints {
        PortfolioConstraints {
            lower: self.lower,
            upper: self.upper,
            iv_cap: self.iv_cap,
        }
    }

    pub fn iv_options(&self) -> IvOptions {
        IvOptions {
            price_tolerance: self.iv_tolerance,
            max_iterations: self.iv_max_iterations,
            ..IvOptions::default()
        }
    }

    /// Chain and spot paths, checked to exist.
    pub fn data_paths(&self) -> Result<(PathBuf, PathBuf), CliError> {
        let chain = self
            .chain
            .clone()
            .ok_or_else(|| invalid("chain", "required for this command"))?;
        let spot = self
            .spot
            .clone()
            .ok_or_else(|| invalid("spot", "required for this command"))?;
        for (name, p) in [("chain", &chain), ("spot", &spot)] {
            if !p.is_file() {
                return Err(invalid(name, format!("{} does not exist", p.display())));
            }
        }
        Ok((chain, spot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "k = 2\nmetric = \"delta\"\nstrategy = \"dynamic\"\n").unwrap();
        let o = Overrides {
            config: Some(path),
            k: Some(4),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.metric, "delta");
        assert_eq!(cfg.strategy_kind().unwrap(), Strategy::Dynamic);
    }

    #[test]
    fn bad_values_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "metric = \"volga\"\n").unwrap();
        let err = RunConfig::resolve(&Overrides {
            config: Some(path.clone()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("metric"));
        fs::write(&path, "colour = 1\n").unwrap();
        let err = RunConfig::resolve(&Overrides {
            config: Some(path),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("colour"));
        assert_eq!(err.exit_code(), 1);
    }
}
