//! Markowitz, risk-free tangency and robust solutions, all closed form or 1-D.

use nalgebra::{DMatrix, DVector};

use super::{regularized_inverse, MomentEstimate, OptimizerError, WeightVector};

/// Frontier geometry: every budget-feasible efficient portfolio is
/// `gmv + t * tilt` for a scalar `t`.
struct Frontier {
    gmv: DVector<f64>,
    tilt: DVector<f64>,
    /// Variance of the minimum-variance portfolio.
    gmv_variance: f64,
    gmv_mean: f64,
    /// `tilt' Sigma tilt`, which also equals `mu' tilt`.
    spread: f64,
    degenerate: bool,
}

impl Frontier {
    fn new(m: &MomentEstimate) -> Result<Self, OptimizerError> {
        let inv: DMatrix<f64> = regularized_inverse(&m.covariance)?;
        let ones = DVector::from_element(m.n(), 1.0);
        let inv_one = &inv * &ones;
        let inv_mu = &inv * &m.mean;
        let a = ones.dot(&inv_one);
        let b = ones.dot(&inv_mu);
        let c = m.mean.dot(&inv_mu);
        let gmv_mean = b / a;
        let tilt = &inv_mu - &inv_one * gmv_mean;
        let spread = c - b * b / a;
        Ok(Self {
            gmv: inv_one / a,
            tilt,
            gmv_variance: 1.0 / a,
            gmv_mean,
            spread,
            degenerate: !(spread > 1e-12 * c.abs()),
        })
    }

    fn at(&self, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.gmv.iter().copied().collect();
        }
        (&self.gmv + &self.tilt * t).iter().copied().collect()
    }

    /// Frontier coordinate reaching `target`.
    fn coordinate(&self, target: f64) -> Result<f64, OptimizerError> {
        if self.degenerate {
            let tol = 1e-9 * (1.0 + self.gmv_mean.abs());
            return if (target - self.gmv_mean).abs() <= tol {
                Ok(0.0)
            } else {
                Err(OptimizerError::TargetUnattainable {
                    target,
                    mean: self.gmv_mean,
                })
            };
        }
        Ok((target - self.gmv_mean) / self.spread)
    }
}

fn check_target(target: f64) -> Result<(), OptimizerError> {
    if target.is_finite() {
        Ok(())
    } else {
        Err(super::invalid(
            "target_return",
            format!("must be finite, got {target}"),
        ))
    }
}

/// Minimum variance subject to full investment and `mean' w = target`.
/// Shorts allowed. `objective_value` is the achieved variance.
pub fn solve_markowitz(m: &MomentEstimate, target: f64) -> Result<WeightVector, OptimizerError> {
    check_target(target)?;
    let f = Frontier::new(m)?;
    let weights = f.at(f.coordinate(target)?);
    Ok(WeightVector {
        universe: m.assets.clone(),
        objective_value: m.variance_of(&weights),
        weights,
        cash: 0.0,
    })
}

/// Tangency direction `Sigma^-1 (mu - rf)` scaled so the blended mean hits
/// `target`; the rest sits in cash.
pub fn solve_with_riskfree(
    m: &MomentEstimate,
    rf: f64,
    target: f64,
) -> Result<WeightVector, OptimizerError> {
    check_target(target)?;
    if !rf.is_finite() {
        return Err(super::invalid("rf", "must be finite"));
    }
    let excess = m.mean.add_scalar(-rf);
    let scale = m.mean.amax().max(rf.abs()).max(f64::MIN_POSITIVE);
    if excess.amax() <= 1e-14 * scale {
        return Err(OptimizerError::NoExcessReturn { rf });
    }
    let inv = regularized_inverse(&m.covariance)?;
    let direction = &inv * &excess;
    let quad = excess.dot(&direction);
    if !(quad > 0.0) {
        return Err(OptimizerError::NoExcessReturn { rf });
    }
    let alpha = (target - rf) / quad;
    let weights: Vec<f64> = direction.iter().map(|d| alpha * d).collect();
    let cash = 1.0 - weights.iter().sum::<f64>();
    Ok(WeightVector {
        universe: m.assets.clone(),
        objective_value: m.variance_of(&weights),
        weights,
        cash,
    })
}

/// Worst-case mean-variance over an ellipsoidal mean uncertainty set of
/// radius `kappa`:
///
/// maximize `mu'w - kappa * sqrt(w' Sigma w) - (gamma / 2) w' Sigma w` with `sum w = 1`,
///
/// where `gamma` is the risk aversion whose unconstrained optimum is the
/// Markowitz portfolio at `target`. `kappa = 0` gives that portfolio back.
/// Targets at or below the minimum-variance mean give the minimum-variance
/// portfolio. `objective_value` is the worst-case mean `mu'w - kappa * sd`.
pub fn solve_robust(
    m: &MomentEstimate,
    kappa: f64,
    target: f64,
) -> Result<WeightVector, OptimizerError> {
    check_target(target)?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(super::invalid(
            "kappa",
            format!("must be finite and non-negative, got {kappa}"),
        ));
    }
    let f = Frontier::new(m)?;
    let t_markowitz = if f.degenerate {
        0.0
    } else {
        (target - f.gmv_mean) / f.spread
    };
    let t = if t_markowitz <= 0.0 || kappa == 0.0 {
        t_markowitz.max(0.0)
    } else {
        // stationarity along the frontier: t * (kappa / sd(t) + gamma) = 1, gamma = 1 / t_markowitz
        let gamma = 1.0 / t_markowitz;
        let g = |t: f64| t * (kappa / (f.gmv_variance + f.spread * t * t).sqrt() + gamma) - 1.0;
        let (mut lo, mut hi) = (0.0, t_markowitz);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let weights = f.at(t);
    let sd = m.variance_of(&weights).max(0.0).sqrt();
    Ok(WeightVector {
        universe: m.assets.clone(),
        objective_value: m.mean_of(&weights) - kappa * sd,
        weights,
        cash: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_asset() -> MomentEstimate {
        let cov = DMatrix::from_row_slice(
            3,
            3,
            &[0.04, 0.006, 0.002, 0.006, 0.09, 0.009, 0.002, 0.009, 0.0225],
        );
        MomentEstimate::from_parts(vec![0.08, 0.12, 0.05], cov).unwrap()
    }

    /// Minimizes variance along the line {sum w = 1, mu'w = target} by a
    /// zooming grid over its one free coordinate.
    fn grid_markowitz(m: &MomentEstimate, target: f64) -> Vec<f64> {
        let mu = [m.mean[0], m.mean[1], m.mean[2]];
        // direction orthogonal to (1,1,1) and mu
        let d = [mu[1] - mu[2], mu[2] - mu[0], mu[0] - mu[1]];
        // particular solution with w2 = 0
        let w1 = (target - mu[2]) / (mu[0] - mu[2]);
        let base = [w1, 0.0, 1.0 - w1];
        let point = |s: f64| [base[0] + s * d[0], base[1] + s * d[1], base[2] + s * d[2]];
        let (mut centre, mut half) = (0.0, 100.0);
        for _ in 0..12 {
            let step = half / 500.0;
            let best = (-500..=500)
                .map(|i| centre + i as f64 * step)
                .min_by(|a, b| {
                    m.variance_of(&point(*a))
                        .total_cmp(&m.variance_of(&point(*b)))
                })
                .unwrap();
            centre = best;
            half = step * 4.0;
        }
        point(centre).to_vec()
    }

    #[test]
    fn symmetric_two_asset() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.04]);
        let m = MomentEstimate::from_parts(vec![0.01, 0.01], cov).unwrap();
        let w = solve_markowitz(&m, 0.01).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
        assert!(matches!(
            solve_markowitz(&m, 0.02),
            Err(OptimizerError::TargetUnattainable { .. })
        ));
    }

    #[test]
    fn three_asset_grid_oracle() {
        let m = three_asset();
        for target in [0.06, 0.08, 0.1] {
            let w = solve_markowitz(&m, target).unwrap();
            let g = grid_markowitz(&m, target);
            for (a, b) in w.weights.iter().zip(&g) {
                assert!((a - b).abs() < 1e-3, "{target}: {:?} vs {g:?}", w.weights);
            }
            assert!((w.total() - 1.0).abs() < 1e-12);
            assert!((m.mean_of(&w.weights) - target).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_assets_singular() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.04, 0.04, 0.04]);
        let m = MomentEstimate::from_parts(vec![0.01, 0.01], cov).unwrap();
        assert!(matches!(
            solve_markowitz(&m, 0.01),
            Err(OptimizerError::SingularCovariance { .. })
        ));
    }

    #[test]
    fn frontier_monotone() {
        let m = three_asset();
        let f = Frontier::new(&m).unwrap();
        let mut prev = 0.0;
        for i in 0..10 {
            let target = f.gmv_mean + 0.01 * i as f64;
            let var = solve_markowitz(&m, target).unwrap().objective_value;
            assert!(var >= prev - 1e-15);
            prev = var;
        }
    }

    #[test]
    fn riskfree_cases() {
        let m = three_asset();
        let w = solve_with_riskfree(&m, 0.01, 0.01).unwrap();
        assert!(w.weights.iter().all(|w| w.abs() < 1e-15));
        assert_eq!(w.cash, 1.0);

        let one =
            MomentEstimate::from_parts(vec![0.02], DMatrix::from_element(1, 1, 0.09)).unwrap();
        let w = solve_with_riskfree(&one, 0.01, 0.015).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-12);
        assert!((w.cash - 0.5).abs() < 1e-12);

        let flat = MomentEstimate::from_parts(vec![0.01, 0.01], DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            solve_with_riskfree(&flat, 0.01, 0.02),
            Err(OptimizerError::NoExcessReturn { .. })
        ));
    }

    #[test]
    fn riskfree_two_asset_hand() {
        // Sigma = [[0.04, 0.01], [0.01, 0.09]], det = 0.0035; excess = (0.02, 0.04)
        // Sigma^-1 excess = (0.09*0.02 - 0.01*0.04, -0.01*0.02 + 0.04*0.04) / 0.0035 = (0.4, 0.4)
        // quad = 0.02*0.4 + 0.04*0.4 = 0.024; target 0.03 -> alpha = 0.02/0.024
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let m = MomentEstimate::from_parts(vec![0.03, 0.05], cov).unwrap();
        let w = solve_with_riskfree(&m, 0.01, 0.03).unwrap();
        let alpha = 0.02 / 0.024;
        for wi in &w.weights {
            assert!((wi - 0.4 * alpha).abs() < 1e-7);
        }
        assert!((w.total() - 1.0).abs() < 1e-12);
        assert!((m.mean_of(&w.weights) + w.cash * 0.01 - 0.03).abs() < 1e-12);
    }

    fn two_asset() -> MomentEstimate {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.006, 0.006, 0.09]);
        MomentEstimate::from_parts(vec![0.06, 0.11], cov).unwrap()
    }

    /// Maximizes the robust objective over w = (x, 1 - x) on a 1e-4 grid, with
    /// gamma taken from the first-order condition of the two-asset Markowitz
    /// point at `target`.
    fn grid_robust(m: &MomentEstimate, kappa: f64, target: f64) -> f64 {
        let (m1, m2) = (m.mean[0], m.mean[1]);
        let (s1, s2, c) = (
            m.covariance[(0, 0)],
            m.covariance[(1, 1)],
            m.covariance[(0, 1)],
        );
        let var = |x: f64| x * x * s1 + (1.0 - x) * (1.0 - x) * s2 + 2.0 * x * (1.0 - x) * c;
        let dvar = |x: f64| 2.0 * x * s1 - 2.0 * (1.0 - x) * s2 + 2.0 * (1.0 - 2.0 * x) * c;
        let x_star = (target - m2) / (m1 - m2);
        let gamma = 2.0 * (m1 - m2) / dvar(x_star);
        let obj = |x: f64| x * m1 + (1.0 - x) * m2 - kappa * var(x).sqrt() - 0.5 * gamma * var(x);
        (-10_000..=20_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap()
    }

    #[test]
    fn robust_zero_kappa_is_markowitz() {
        for m in [two_asset(), three_asset()] {
            let target = m.mean.max() * 0.95;
            let r = solve_robust(&m, 0.0, target).unwrap();
            let w = solve_markowitz(&m, target).unwrap();
            for (a, b) in r.weights.iter().zip(&w.weights) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn robust_matches_grid() {
        let m = two_asset();
        let target = 0.1;
        for kappa in [0.1, 0.5, 2.0] {
            let r = solve_robust(&m, kappa, target).unwrap();
            let x = grid_robust(&m, kappa, target);
            assert!(
                (r.weights[0] - x).abs() < 1e-3,
                "kappa {kappa}: {} vs {x}",
                r.weights[0]
            );
            assert!((r.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn robust_large_kappa_is_min_variance() {
        let m = two_asset();
        let (s1, s2, c) = (0.04, 0.09, 0.006);
        let var = |x: f64| x * x * s1 + (1.0 - x) * (1.0 - x) * s2 + 2.0 * x * (1.0 - x) * c;
        let x_gmv = (0..=10_000)
            .map(|i| i as f64 * 1e-4)
            .min_by(|a, b| var(*a).total_cmp(&var(*b)))
            .unwrap();
        let r = solve_robust(&m, 1e4, 0.1).unwrap();
        assert!((r.weights[0] - x_gmv).abs() < 1e-3);
        let below = solve_robust(&m, 0.5, 0.0).unwrap();
        assert!((below.weights[0] - x_gmv).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn markowitz_scale_invariant(scale in 0.1f64..10.0, target in 0.05f64..0.15) {
            let m = three_asset();
            let scaled = MomentEstimate::from_parts(m.mean.iter().map(|v| v * scale).collect(), m.covariance.clone()).unwrap();
            let a = solve_markowitz(&m, target).unwrap();
            let b = solve_markowitz(&scaled, target * scale).unwrap();
            for (x, y) in a.weights.iter().zip(&b.weights) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn robust_between_gmv_and_markowitz(kappa in 0.0f64..5.0) {
            let m = three_asset();
            let target = 0.1;
            let r = solve_robust(&m, kappa, target).unwrap();
            let w = solve_markowitz(&m, target).unwrap();
            prop_assert!((r.total() - 1.0).abs() < 1e-12);
            prop_assert!(m.variance_of(&r.weights) <= w.objective_value + 1e-12);
            prop_assert!(m.mean_of(&r.weights) <= target + 1e-12);
        }
    }
}
