//! American Greeks: the lattice delta with its exercise-region split, and
//! bump-and-reprice for the rest.

use amopt::greeks::{classify_region, delta_fd, delta_ms, greek_set_with, GreekBumps};
use amopt::pricing::{black_scholes_greeks, ContractType, Exercise, PricingInputs};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let put = PricingInputs {
        spot: 100.0,
        strike: 100.0,
        time_to_maturity: 1.0,
        rate: 0.05,
        dividend_yield: 0.0,
        volatility: 0.2,
        steps: 400,
        contract_type: ContractType::Put,
        exercise: Exercise::American,
    };
    let bumps = GreekBumps::default();
    println!("{:>6} {:>13} {:>9} {:>9}", "spot", "region", "ms", "fd");
    for spot in [60.0, 80.0, 90.0, 100.0, 110.0, 130.0] {
        let p = put.with_spot(spot);
        println!(
            "{spot:>6} {:>13} {:>9.5} {:>9.5}",
            classify_region(&p)?.as_str(),
            delta_ms(&p)?,
            delta_fd(&p, bumps.delta_spot)?
        );
    }

    let (g, region) = greek_set_with(&put, &bumps)?;
    println!("ATM American put ({}): {g:?}", region.as_str());

    let eu = put.with_exercise(Exercise::European);
    let (lattice, _) = greek_set_with(&eu, &bumps)?;
    let closed = black_scholes_greeks(&eu)?;
    println!("European put, lattice vs closed form:");
    println!("  delta {:+.5} {:+.5}", lattice.delta, closed.delta);
    println!("  gamma {:+.5} {:+.5}", lattice.gamma, closed.gamma);
    println!("  theta {:+.5} {:+.5}", lattice.theta, closed.theta);
    println!("  vega  {:+.5} {:+.5}", lattice.vega, closed.vega);
    println!("  rho   {:+.5} {:+.5}", lattice.rho, closed.rho);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
