//! The weight problems side by side on one set of simulated returns.

use amopt::optimizer::{
    estimate_moments, shrink_covariance, solve_box_constrained, solve_markowitz, solve_robust,
    solve_with_riskfree, PortfolioConstraints,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let means = [0.004, 0.002, 0.006, -0.001, 0.003, 0.001];
    let vols = [0.03, 0.02, 0.05, 0.015, 0.04, 0.025];
    let common = Normal::new(0.0, 0.01)?;
    let noise = Normal::new(0.0, 1.0)?;
    let mut data = Vec::with_capacity(60 * 6);
    for _ in 0..60 {
        let f = common.sample(&mut rng);
        data.extend((0..6).map(|j| means[j] + f + vols[j] * noise.sample(&mut rng)));
    }
    let returns = DMatrix::from_row_slice(60, 6, &data);
    let m = estimate_moments(&returns, 40)?;
    let target = m.equal_weight_mean();
    let show = |name: &str, w: &[f64], extra: String| {
        let ws: Vec<String> = w.iter().map(|v| format!("{v:+.3}")).collect();
        println!("{name:<10} [{}] {extra}", ws.join(" "));
    };

    let mk = solve_markowitz(&m, target)?;
    show(
        "markowitz",
        &mk.weights,
        format!("var {:.3e}", mk.objective_value),
    );
    let rf = solve_with_riskfree(&m, 0.0002, target)?;
    show("riskfree", &rf.weights, format!("cash {:+.3}", rf.cash));
    let sh = solve_markowitz(
        &m.with_covariance(shrink_covariance(&m.covariance, 0.2)?),
        target,
    )?;
    show("shrinkage", &sh.weights, String::new());
    for kappa in [0.0, 0.1, 1.0] {
        let r = solve_robust(&m, kappa, target)?;
        show(
            &format!("robust {kappa}"),
            &r.weights,
            format!("worst-case mean {:.3e}", r.objective_value),
        );
    }

    let c = PortfolioConstraints::default();
    let b = solve_box_constrained(&m, &c, None, 1.0)?;
    show(
        "box",
        &b.weights.weights,
        format!("{} iterations", b.iterations),
    );
    let ivs = [0.45, 0.20, 0.60, 0.18, 0.35, 0.25];
    let capped = PortfolioConstraints {
        iv_cap: Some(0.28),
        ..c
    };
    let b = solve_box_constrained(&m, &capped, Some(&ivs), 1.0)?;
    let iv: f64 = b.weights.weights.iter().zip(&ivs).map(|(w, s)| w * s).sum();
    show(
        "box+cap",
        &b.weights.weights,
        format!("portfolio IV {iv:.4}"),
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
