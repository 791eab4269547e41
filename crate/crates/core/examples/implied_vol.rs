//! Recovering volatility from prices with the guarded Newton solver.

use amopt::implied_vol::{implied_vol, portfolio_iv, price_bounds, IvOptions, SolveMode};
use amopt::pricing::{price_option, ContractType, Exercise, PricingInputs};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let base = PricingInputs {
        spot: 430.0,
        strike: 430.0,
        time_to_maturity: 0.25,
        rate: 0.05,
        dividend_yield: 0.0,
        volatility: 0.2,
        steps: 300,
        contract_type: ContractType::Put,
        exercise: Exercise::American,
    };
    let opts = IvOptions::default();
    let mut ivs = Vec::new();
    for (strike, sigma) in [(380.0, 0.32), (430.0, 0.18), (470.0, 0.22)] {
        let contract = PricingInputs { strike, ..base };
        let price = price_option(&contract.with_volatility(sigma))?;
        let (lo, hi) = price_bounds(&contract);
        let sol = implied_vol(price, &contract, &opts)?;
        println!(
            "K={strike}: price {price:.4} in [{lo:.3}, {hi:.1}] -> sigma {:.6} (true {sigma}) via {} in {} evaluations",
            sol.sigma,
            sol.method.as_str(),
            sol.iterations
        );
        ivs.push(sol.sigma);
    }
    println!(
        "portfolio IV at (0.5, 0.3, 0.2): {:.4}",
        portfolio_iv(&[0.5, 0.3, 0.2], &ivs)?
    );

    let deep = PricingInputs {
        strike: 520.0,
        volatility: 0.6,
        ..base
    };
    let price = price_option(&deep)?;
    for mode in [SolveMode::Hybrid, SolveMode::NewtonOnly] {
        let sol = implied_vol(price, &deep, &IvOptions { mode, ..opts })?;
        println!(
            "deep ITM put, {mode:?}: sigma {:.6} converged {}",
            sol.sigma, sol.converged
        );
    }

    match implied_vol(500.0, &base, &opts) {
        Err(e) => println!("price 500 for a 430 put: {e}"),
        Ok(_) => unreachable!("above the static bound"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
