//! Lattice prices for American and European contracts, the early-exercise
//! premium, and convergence towards the closed form as steps grow.

use amopt::pricing::{
    black_scholes_price, build_lattice, price_option, ContractType, Exercise, PricingInputs,
};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let put = PricingInputs {
        spot: 95.0,
        strike: 100.0,
        time_to_maturity: 0.5,
        rate: 0.05,
        dividend_yield: 0.0,
        volatility: 0.25,
        steps: 500,
        contract_type: ContractType::Put,
        exercise: Exercise::American,
    };
    let american = price_option(&put)?;
    let european = price_option(&put.with_exercise(Exercise::European))?;
    println!(
        "put  S=95 K=100: american {american:.4}  european {european:.4}  premium {:.4}",
        american - european
    );

    let call = put.with_contract_type(ContractType::Call);
    println!(
        "call S=95 K=100: american {:.6}  european {:.6}",
        price_option(&call)?,
        price_option(&call.with_exercise(Exercise::European))?
    );

    let closed = black_scholes_price(&put.with_exercise(Exercise::European))?;
    for steps in [10, 50, 250, 1000] {
        let p = price_option(&put.with_exercise(Exercise::European).with_steps(steps))?;
        println!(
            "N={steps:<5} european put {p:.6}  error {:+.2e}",
            p - closed
        );
    }

    let small = build_lattice(&put.with_steps(3))?;
    println!(
        "3-step tree: u={:.4} d={:.4} q={:.4}",
        small.up, small.down, small.q_rn
    );
    for (i, layer) in small.values.iter().enumerate() {
        let row: Vec<String> = layer.iter().map(|v| format!("{v:7.3}")).collect();
        println!("  step {i}: {}", row.join(" "));
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
