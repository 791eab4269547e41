//! Mean-variance utility over the box-and-budget polytope with an optional
//! IV cap, solved by accelerated projected gradient.

use nalgebra::DVector;

use super::{
    invalid, largest_eigenvalue, MomentEstimate, OptimizerError, PortfolioConstraints, WeightVector,
};

const KKT_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution {
    pub weights: WeightVector,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Smallest `sum w_i * iv_i` reachable inside the box with weights summing to one.
pub fn min_attainable_iv(ivs: &[f64], lower: f64, upper: f64) -> f64 {
    let mut order: Vec<usize> = (0..ivs.len()).collect();
    order.sort_by(|&a, &b| ivs[a].total_cmp(&ivs[b]));
    let mut left = 1.0 - lower * ivs.len() as f64;
    let mut total: f64 = ivs.iter().map(|v| v * lower).sum();
    for i in order {
        let add = left.min(upper - lower).max(0.0);
        total += add * ivs[i];
        left -= add;
    }
    total
}

fn clip(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

/// Euclidean projection onto `{sum w = 1, lower <= w <= upper}`. The sum is
/// piecewise linear in the shift, so the shift is found exactly between
/// consecutive breakpoints.
fn project_budget(y: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    let total = |nu: f64| y.iter().map(|v| clip(v - nu, lower, upper)).sum::<f64>();
    let mut breaks: Vec<f64> = y.iter().flat_map(|v| [v - upper, v - lower]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut nu = breaks[0];
    let mut prev = (breaks[0], total(breaks[0]));
    for &b in &breaks[1..] {
        let s = total(b);
        if s <= 1.0 {
            let (b0, s0) = prev;
            nu = if s0 > s {
                b0 + (s0 - 1.0) / (s0 - s) * (b - b0)
            } else {
                b0
            };
            break;
        }
        prev = (b, s);
        nu = b;
    }
    y.iter().map(|v| clip(v - nu, lower, upper)).collect()
}

/// Euclidean projection onto the feasible polytope. Assumes the constraints
/// are feasible; with an IV cap the cap multiplier is found by bisection.
pub fn project_onto_polytope(y: &[f64], c: &PortfolioConstraints, ivs: Option<&[f64]>) -> Vec<f64> {
    let base = project_budget(y, c.lower, c.upper);
    let (Some(cap), Some(ivs)) = (c.iv_cap, ivs) else {
        return base;
    };
    let iv_of = |w: &[f64]| w.iter().zip(ivs).map(|(w, s)| w * s).sum::<f64>();
    if iv_of(&base) <= cap {
        return base;
    }
    let at = |eta: f64| {
        let shifted: Vec<f64> = y.iter().zip(ivs).map(|(v, s)| v - eta * s).collect();
        project_budget(&shifted, c.lower, c.upper)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = at(hi);
    for _ in 0..64 {
        if iv_of(&best) <= cap {
            break;
        }
        lo = hi;
        hi *= 2.0;
        best = at(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w = at(mid);
        if iv_of(&w) <= cap {
            hi = mid;
            best = w;
        } else {
            lo = mid;
        }
    }
    best
}

fn validate(
    m: &MomentEstimate,
    c: &PortfolioConstraints,
    ivs: Option<&[f64]>,
    lambda: f64,
) -> Result<(), OptimizerError> {
    let n = m.n();
    c.validate(n)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(
            "lambda",
            format!("risk aversion must be finite and non-negative, got {lambda}"),
        ));
    }
    match (c.iv_cap, ivs) {
        (None, None) => Ok(()),
        (Some(_), None) => Err(invalid("ivs", "an IV cap needs per-asset IVs")),
        (None, Some(_)) => Err(invalid("ivs", "per-asset IVs given without an IV cap")),
        (Some(cap), Some(ivs)) => {
            if ivs.len() != n {
                return Err(invalid(
                    "ivs",
                    format!("expected {n} values, got {}", ivs.len()),
                ));
            }
            if ivs.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("ivs", "values must be finite and non-negative"));
            }
            let min = min_attainable_iv(ivs, c.lower, c.upper);
            if min > cap * (1.0 + 1e-12) {
                return Err(OptimizerError::InfeasibleIvCap { cap, min });
            }
            Ok(())
        }
    }
}

/// Maximizes `mu'w - lambda * w' Sigma w` subject to full investment, the box
/// and the optional IV cap. Starts from the projection of the equal-weight
/// portfolio and stops once the projected-gradient residual is below 1e-9.
pub fn solve_box_constrained(
    m: &MomentEstimate,
    c: &PortfolioConstraints,
    ivs: Option<&[f64]>,
    lambda: f64,
) -> Result<BoxSolution, OptimizerError> {
    validate(m, c, ivs, lambda)?;
    let n = m.n();
    let sigma = &m.covariance;
    let mu = &m.mean;
    let spread = mu.max() - mu.min();
    let lipschitz = (2.0 * lambda * largest_eigenvalue(sigma))
        .max(10.0 * spread)
        .max(1e-12);
    let step = 1.0 / lipschitz;

    let project = |v: &DVector<f64>| DVector::from_vec(project_onto_polytope(v.as_slice(), c, ivs));
    // gradient of the minimized objective lambda w'Sigma w - mu'w
    let grad = |w: &DVector<f64>| sigma * w * (2.0 * lambda) - mu;
    let residual = |w: &DVector<f64>| (w - project(&(w - grad(w) * step))).amax();

    let mut x = project(&DVector::from_element(n, 1.0 / n as f64));
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut res = residual(&x);
    let mut iterations = 0;
    while res > KKT_TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(OptimizerError::NoConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let next = project(&(&y - grad(&y) * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if (&y - &next).dot(&(&next - &x)) > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = next;
        res = residual(&x);
    }

    let weights: Vec<f64> = x.iter().copied().collect();
    Ok(BoxSolution {
        weights: WeightVector {
            universe: m.assets.clone(),
            objective_value: m.mean_of(&weights) - lambda * m.variance_of(&weights),
            weights,
            cash: 0.0,
        },
        iterations,
        kkt_residual: res,
    })
}
