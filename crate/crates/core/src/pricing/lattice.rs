use super::{payoff, Exercise, PricingError, PricingInputs};

/// CRR step parameters shared by every induction routine.
#[derive(Debug, Clone, Copy)]
struct StepParams {
    up: f64,
    down: f64,
    q_rn: f64,
    discount: f64,
}

impl StepParams {
    fn new(inputs: &PricingInputs) -> Result<Self, PricingError> {
        inputs.validate()?;
        let dt = inputs.dt();
        let up = (inputs.volatility * dt.sqrt()).exp();
        let down = 1.0 / up;
        let growth = ((inputs.rate - inputs.dividend_yield) * dt).exp();
        let q_rn = (growth - down) / (up - down);
        if !(q_rn > 0.0 && q_rn < 1.0) {
            return Err(PricingError::DegenerateProbability { q_rn });
        }
        Ok(Self {
            up,
            down,
            q_rn,
            discount: (-inputs.rate * dt).exp(),
        })
    }
}

/// A fully retained backward-induction tree.
///
/// `values[i][j]` is the option value at step `i` after `j` up-moves, so layer
/// `i` holds `i + 1` nodes.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub steps: usize,
    pub up: f64,
    pub down: f64,
    pub q_rn: f64,
    pub discount: f64,
    pub spot: f64,
    pub values: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn root(&self) -> f64 {
        self.values[0][0]
    }

    /// Underlying price at node `(step, ups)`.
    pub fn spot_at(&self, step: usize, ups: usize) -> f64 {
        self.spot * self.up.powi(2 * ups as i32 - step as i32)
    }
}

/// The pieces of the tree the Greeks need: root value, the two step-one node
/// values, and the discounted continuation value at the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSummary {
    pub root: f64,
    pub step1_down: f64,
    pub step1_up: f64,
    pub continuation: f64,
    pub q_rn: f64,
    pub up: f64,
    pub down: f64,
}

pub fn build_lattice(inputs: &PricingInputs) -> Result<Lattice, PricingError> {
    let p = StepParams::new(inputs)?;
    let n = inputs.steps;
    let american = inputs.exercise == Exercise::American;

    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    values.resize_with(n + 1, Vec::new);
    values[n] = terminal_layer(inputs, &p);
    for i in (0..n).rev() {
        let next = &values[i + 1];
        let mut layer = Vec::with_capacity(i + 1);
        let mut s = inputs.spot * p.down.powi(i as i32);
        let up2 = p.up * p.up;
        for j in 0..=i {
            let cont = p.discount * (p.q_rn * next[j + 1] + (1.0 - p.q_rn) * next[j]);
            let v = if american {
                cont.max(payoff(s, inputs.strike, inputs.contract_type))
            } else {
                cont
            };
            layer.push(v);
            s *= up2;
        }
        values[i] = layer;
    }
    Ok(Lattice {
        steps: n,
        up: p.up,
        down: p.down,
        q_rn: p.q_rn,
        discount: p.discount,
        spot: inputs.spot,
        values,
    })
}

/// Root value of the lattice without retaining intermediate layers.
pub fn price_option(inputs: &PricingInputs) -> Result<f64, PricingError> {
    root_summary(inputs).map(|s| s.root)
}

pub(crate) fn root_summary(inputs: &PricingInputs) -> Result<RootSummary, PricingError> {
    let p = StepParams::new(inputs)?;
    let n = inputs.steps;
    let american = inputs.exercise == Exercise::American;
    let up2 = p.up * p.up;
    let mut layer = terminal_layer(inputs, &p);

    for i in (1..n).rev() {
        let mut s = inputs.spot * p.down.powi(i as i32);
        for j in 0..=i {
            let cont = p.discount * (p.q_rn * layer[j + 1] + (1.0 - p.q_rn) * layer[j]);
            layer[j] = if american {
                cont.max(payoff(s, inputs.strike, inputs.contract_type))
            } else {
                cont
            };
            s *= up2;
        }
    }
    let (step1_down, step1_up) = (layer[0], layer[1]);
    let continuation = p.discount * (p.q_rn * step1_up + (1.0 - p.q_rn) * step1_down);
    let root = if american {
        continuation.max(inputs.intrinsic())
    } else {
        continuation
    };
    Ok(RootSummary {
        root,
        step1_down,
        step1_up,
        continuation,
        q_rn: p.q_rn,
        up: p.up,
        down: p.down,
    })
}

fn terminal_layer(inputs: &PricingInputs, p: &StepParams) -> Vec<f64> {
    let n = inputs.steps;
    let up2 = p.up * p.up;
    let mut s = inputs.spot * p.down.powi(n as i32);
    (0..=n)
        .map(|_| {
            let v = payoff(s, inputs.strike, inputs.contract_type);
            s *= up2;
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{black_scholes_price, ContractType};

    fn standard(contract_type: ContractType, exercise: Exercise, steps: usize) -> PricingInputs {
        PricingInputs {
            spot: 100.0,
            strike: 100.0,
            time_to_maturity: 1.0,
            rate: 0.05,
            dividend_yield: 0.0,
            volatility: 0.2,
            steps,
            contract_type,
            exercise,
        }
    }

    #[test]
    fn one_step_put_matches_hand_recursion() {
        let inputs = PricingInputs {
            rate: 0.0,
            steps: 1,
            ..standard(ContractType::Put, Exercise::American, 1)
        };
        let lattice = build_lattice(&inputs).unwrap();
        let d = (-0.2f64).exp();
        let u = 0.2f64.exp();
        let q = (1.0 - d) / (u - d);
        let expected = (1.0 - q) * (100.0 - 100.0 * d);
        assert!((lattice.root() - expected).abs() < 1e-12);
        assert!((price_option(&inputs).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn crr_identity() {
        let lattice = build_lattice(&standard(ContractType::Call, Exercise::European, 4)).unwrap();
        assert!((lattice.up - 0.1f64.exp()).abs() < 1e-15);
        assert!((lattice.down - (-0.1f64).exp()).abs() < 1e-15);
        assert!((lattice.up * lattice.down - 1.0).abs() < 1e-15);
        assert_eq!(lattice.values.len(), 5);
        assert_eq!(lattice.values[4].len(), 5);
    }

    #[test]
    fn huge_rate_is_degenerate() {
        let inputs = PricingInputs {
            rate: 5.0,
            ..standard(ContractType::Call, Exercise::European, 1)
        };
        assert!(matches!(
            build_lattice(&inputs),
            Err(PricingError::DegenerateProbability { .. })
        ));
        assert!(matches!(
            price_option(&inputs),
            Err(PricingError::DegenerateProbability { .. })
        ));
    }

    #[test]
    fn rolling_and_retained_induction_agree() {
        for ct in [ContractType::Call, ContractType::Put] {
            for ex in [Exercise::American, Exercise::European] {
                let inputs = standard(ct, ex, 157);
                let full = build_lattice(&inputs).unwrap();
                let summary = root_summary(&inputs).unwrap();
                assert_eq!(full.root(), summary.root);
                assert_eq!(full.values[1][0], summary.step1_down);
                assert_eq!(full.values[1][1], summary.step1_up);
            }
        }
    }

    #[test]
    fn european_call_converges_to_closed_form() {
        let inputs = standard(ContractType::Call, Exercise::European, 1000);
        let bs = black_scholes_price(&inputs).unwrap();
        assert!((price_option(&inputs).unwrap() - bs).abs() < 0.01);
    }

    #[test]
    fn american_dominance_and_intrinsic_floor() {
        let lattice = build_lattice(&standard(ContractType::Put, Exercise::American, 200)).unwrap();
        for (i, layer) in lattice.values.iter().enumerate() {
            for (j, v) in layer.iter().enumerate() {
                let intrinsic = payoff(lattice.spot_at(i, j), 100.0, ContractType::Put);
                assert!(*v >= intrinsic - 1e-12);
            }
        }
        let eu = price_option(&standard(ContractType::Put, Exercise::European, 200)).unwrap();
        assert!(lattice.root() >= eu);
    }

    #[test]
    fn deep_itm_american_put_is_intrinsic() {
        let inputs = PricingInputs {
            spot: 1.0,
            ..standard(ContractType::Put, Exercise::American, 2000)
        };
        let v = price_option(&inputs).unwrap();
        assert!((v - 99.0).abs() < 1e-9, "{v}");
    }
}
