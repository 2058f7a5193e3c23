//! Closed-form complexity bounds, losses and the generalization bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::{validate_rho, DropoutType};
use crate::net::NetworkSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross entropy on a sigmoid output, labels in {0, 1}.
    CrossEntropySigmoid,
    /// `(y - f)^2`.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// `|y| <= y_bound` for the square loss.
    #[serde(default = "default_y_bound")]
    pub y_bound: f64,
    /// Sigmoid outputs are clamped to `[p_min, 1 - p_min]`.
    #[serde(default = "default_p_min")]
    pub p_min: f64,
}

fn default_y_bound() -> f64 {
    1.0
}

fn default_p_min() -> f64 {
    1e-6
}

impl LossSpec {
    pub fn square(y_bound: f64) -> Self {
        LossSpec {
            kind: LossKind::Square,
            y_bound,
            p_min: default_p_min(),
        }
    }

    pub fn cross_entropy(p_min: f64) -> Self {
        LossSpec {
            kind: LossKind::CrossEntropySigmoid,
            y_bound: 1.0,
            p_min,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::invalid("p_min", format!("{} is outside (0, 0.5)", self.p_min)));
        }
        if !(self.y_bound > 0.0 && self.y_bound.is_finite()) {
            return Err(Error::invalid("y_bound", "must be positive"));
        }
        Ok(())
    }

    fn clamped_sigmoid(&self, f: f64) -> (f64, bool) {
        let p = 1.0 / (1.0 + (-f).exp());
        if p < self.p_min {
            (self.p_min, true)
        } else if p > 1.0 - self.p_min {
            (1.0 - self.p_min, true)
        } else {
            (p, false)
        }
    }

    /// Loss of prediction `f` against label `y`; entropy labels are 0 or 1.
    pub fn eval(&self, f: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => (y - f) * (y - f),
            LossKind::CrossEntropySigmoid => {
                let (p, _) = self.clamped_sigmoid(f);
                let mut l = 0.0;
                if y > 0.0 {
                    l -= y * p.ln();
                }
                if y < 1.0 {
                    l -= (1.0 - y) * (1.0 - p).ln();
                }
                l
            }
        }
    }

    /// Derivative in the prediction `f`.
    pub fn derivative(&self, f: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => 2.0 * (f - y),
            LossKind::CrossEntropySigmoid => {
                let (p, clamped) = self.clamped_sigmoid(f);
                if clamped {
                    0.0
                } else {
                    p - y
                }
            }
        }
    }
}

/// `L^k · B̂ · prod_j B_j`, a bound on `|f(w, x, r)|` for feasible `w`,
/// `||x|| <= B̂` and any masks.
pub fn output_bound(spec: &NetworkSpec) -> f64 {
    spec.lipschitz().powi(spec.depth() as i32)
        * spec.input_bound
        * spec.budgets.iter().product::<f64>()
}

/// Upper bound on the Rademacher complexity of the dropout class.
///
/// * `k = 0`: `B·B̂·sqrt(rho/n)` for types I/II, `B·B̂·rho/sqrt(n)` for III.
/// * `k >= 1`: `L^k·B̂·prod B_j·rho^((k+1)/2)/sqrt(n)` for I/II, with
///   `rho^(k+1)` for III.
pub fn theoretical_complexity_bound(
    spec: &NetworkSpec,
    kind: DropoutType,
    rho: f64,
    n: usize,
) -> Result<f64> {
    validate_rho(rho)?;
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    let k = spec.depth();
    let sqrt_n = (n as f64).sqrt();
    let scale = output_bound(spec);
    let rho_factor = match (k, kind) {
        (0, DropoutType::I | DropoutType::II) => rho.sqrt(),
        (0, DropoutType::III) => rho,
        (_, DropoutType::I | DropoutType::II) => rho.powf((k + 1) as f64 / 2.0),
        (_, DropoutType::III) => rho.powi(k as i32 + 1),
    };
    Ok(scale * rho_factor / sqrt_n)
}

/// Lipschitz constant of the loss in its first argument over
/// `|f| <= f_bound`.
pub fn loss_lipschitz(loss: &LossSpec, f_bound: f64) -> f64 {
    match loss.kind {
        LossKind::CrossEntropySigmoid => 1.0,
        LossKind::Square => 2.0 * (loss.y_bound + f_bound),
    }
}

/// Bound `B` on the loss value.
pub fn loss_bound(loss: &LossSpec, f_bound: f64) -> f64 {
    match loss.kind {
        LossKind::CrossEntropySigmoid => -loss.p_min.ln(),
        LossKind::Square => (loss.y_bound + f_bound).powi(2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// Expected complexity, deviation `B·sqrt(ln(2/δ)/n)`.
    Expected,
    /// Empirical complexity, deviation `3B·sqrt(ln(2/δ)/n)`.
    Empirical,
}

impl BoundVariant {
    fn deviation_factor(self) -> f64 {
        match self {
            BoundVariant::Expected => 1.0,
            BoundVariant::Empirical => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub empirical_risk: f64,
    /// Complexity of the dropout class fed in (bound or estimate).
    pub complexity_bound: f64,
    pub loss_lipschitz: f64,
    pub loss_bound: f64,
    /// `c·B·sqrt(ln(2/δ)/n)` with `c` from the variant.
    pub mcdiarmid_term: f64,
    pub total_bound: f64,
    pub n: usize,
    pub delta: f64,
    pub rho: Option<f64>,
    pub budgets: Vec<f64>,
    pub input_bound: f64,
}

/// `R(w) <= empirical_risk + 2·Lip(loss)·complexity + c·B·sqrt(ln(2/δ)/n)`.
pub fn generalization_bound(
    empirical_risk: f64,
    complexity_quantity: f64,
    loss: &LossSpec,
    spec: &NetworkSpec,
    delta: f64,
    n: usize,
    variant: BoundVariant,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} is outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    if complexity_quantity.is_nan() || complexity_quantity < 0.0 {
        return Err(Error::invalid("complexity", "must be nonnegative"));
    }
    loss.validate()?;
    let f_bound = output_bound(spec);
    let lip = loss_lipschitz(loss, f_bound);
    let b = loss_bound(loss, f_bound);
    let mcdiarmid = variant.deviation_factor() * b * ((2.0 / delta).ln() / n as f64).sqrt();
    Ok(BoundReport {
        variant,
        empirical_risk,
        complexity_bound: complexity_quantity,
        loss_lipschitz: lip,
        loss_bound: b,
        mcdiarmid_term: mcdiarmid,
        total_bound: empirical_risk + 2.0 * lip * complexity_quantity + mcdiarmid,
        n,
        delta,
        rho: None,
        budgets: spec.budgets.clone(),
        input_bound: spec.input_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;

    fn deep(k: usize) -> NetworkSpec {
        NetworkSpec::new(3, vec![2; k], vec![1.0; k + 1], Activation::Tanh, 1.0).unwrap()
    }

    #[test]
    fn linear_bounds() {
        let spec = NetworkSpec::linear(4, 1.0, 1.0).unwrap();
        let b = theoretical_complexity_bound(&spec, DropoutType::I, 0.25, 100).unwrap();
        assert!((b - 0.05).abs() < 1e-15);
        let b2 = theoretical_complexity_bound(&spec, DropoutType::II, 0.25, 100).unwrap();
        assert_eq!(b, b2);
        let b3 = theoretical_complexity_bound(&spec, DropoutType::III, 0.25, 100).unwrap();
        assert!((b3 - 0.025).abs() < 1e-15);
    }

    #[test]
    fn deep_bound_example() {
        let b = theoretical_complexity_bound(&deep(2), DropoutType::II, 0.25, 100).unwrap();
        assert!((b - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn one_hidden_layer_matches_shallow_statement() {
        // one hidden layer: L·B1·B0·B̂·rho/sqrt(n), rho^2 for type III
        let spec = NetworkSpec::new(3, vec![5], vec![2.0, 3.0], Activation::CenteredSigmoid, 1.5).unwrap();
        let (rho, n) = (0.4, 49usize);
        let base = 0.25 * 3.0 * 2.0 * 1.5 / 7.0;
        let b2 = theoretical_complexity_bound(&spec, DropoutType::II, rho, n).unwrap();
        let b3 = theoretical_complexity_bound(&spec, DropoutType::III, rho, n).unwrap();
        assert!((b2 - base * rho).abs() < 1e-15);
        assert!((b3 - base * rho * rho).abs() < 1e-15);
    }

    #[test]
    fn no_dropout_value() {
        for k in 1..4 {
            let spec = NetworkSpec::new(3, vec![2; k], vec![1.5; k + 1], Activation::Tanh, 2.0).unwrap();
            let b = theoretical_complexity_bound(&spec, DropoutType::I, 1.0, 64).unwrap();
            let expected = 2.0 * 1.5f64.powi(k as i32 + 1) / 8.0;
            assert!((b - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn invalid_inputs() {
        let spec = deep(1);
        assert!(theoretical_complexity_bound(&spec, DropoutType::I, 1.5, 10).is_err());
        assert!(theoretical_complexity_bound(&spec, DropoutType::I, 0.5, 0).is_err());
        let loss = LossSpec::square(1.0);
        for delta in [0.0, 1.0, -0.1, 2.0] {
            assert!(generalization_bound(0.0, 0.0, &loss, &spec, delta, 10, BoundVariant::Expected).is_err());
        }
    }

    #[test]
    fn exponents_by_two_point_log_ratio() {
        for k in 0..5 {
            let spec = deep(k);
            for kind in DropoutType::ALL {
                let (r1, r2) = (0.2, 0.8);
                let b1 = theoretical_complexity_bound(&spec, kind, r1, 50).unwrap();
                let b2 = theoretical_complexity_bound(&spec, kind, r2, 50).unwrap();
                let slope = (b2 / b1).ln() / (r2 / r1).ln();
                let expected = match (k, kind) {
                    (0, DropoutType::III) => 1.0,
                    (0, _) => 0.5,
                    (_, DropoutType::III) => (k + 1) as f64,
                    _ => (k + 1) as f64 / 2.0,
                };
                assert!((slope - expected).abs() < 1e-12, "k={k} {kind}: {slope}");
            }
        }
    }

    #[test]
    fn monotone_in_parameters() {
        let base = NetworkSpec::new(3, vec![2, 2], vec![1.0, 1.0, 1.0], Activation::Tanh, 1.0).unwrap();
        for kind in DropoutType::ALL {
            let b = theoretical_complexity_bound(&base, kind, 0.5, 100).unwrap();
            for j in 0..3 {
                let mut s = base.clone();
                s.budgets[j] = 1.5;
                assert!(theoretical_complexity_bound(&s, kind, 0.5, 100).unwrap() > b);
            }
            let mut s = base.clone();
            s.input_bound = 2.0;
            assert!(theoretical_complexity_bound(&s, kind, 0.5, 100).unwrap() > b);
            assert!(theoretical_complexity_bound(&base, kind, 0.6, 100).unwrap() > b);
            assert!(theoretical_complexity_bound(&base, kind, 0.5, 101).unwrap() < b);
        }
    }

    #[test]
    fn loss_constants() {
        assert_eq!(loss_lipschitz(&LossSpec::cross_entropy(1e-6), 3.0), 1.0);
        let sq = LossSpec::square(1.0);
        assert_eq!(loss_lipschitz(&sq, 1.0), 4.0);
        assert_eq!(loss_bound(&sq, 1.0), 4.0);
        let flat = LossSpec {
            kind: LossKind::Square,
            y_bound: 0.0,
            p_min: 1e-6,
        };
        assert_eq!(loss_lipschitz(&flat, 0.0), 0.0);
        let ce = LossSpec::cross_entropy(1e-6);
        assert!((loss_bound(&ce, 10.0) - 1e6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn output_bound_examples() {
        let lin = NetworkSpec::linear(3, 2.0, 3.0).unwrap();
        assert_eq!(output_bound(&lin), 6.0);
        assert_eq!(output_bound(&deep(1)), 1.0);
    }

    #[test]
    fn losses_respect_their_constants() {
        // sampled check that |l(a) - l(b)| <= Lip |a - b| and 0 <= l <= B
        let ce = LossSpec::cross_entropy(1e-3);
        let sq = LossSpec::square(1.0);
        let f_bound = 2.0;
        for i in 0..=400 {
            let a = -f_bound + 4.0 * i as f64 / 400.0;
            let b = a + 1e-3;
            for (loss, labels) in [(ce, [0.0, 1.0]), (sq, [-1.0, 1.0])] {
                for y in labels {
                    let (la, lb) = (loss.eval(a, y), loss.eval(b.min(f_bound), y));
                    assert!(la >= 0.0 && la <= loss_bound(&loss, f_bound) + 1e-12);
                    assert!((la - lb).abs() <= loss_lipschitz(&loss, f_bound) * (b.min(f_bound) - a) * (1.0 + 1e-9));
                }
            }
        }
        // derivative matches a central difference inside the clamp
        for f in [-1.5, -0.2, 0.0, 0.7, 1.9] {
            for y in [0.0, 1.0] {
                let h = 1e-6;
                let fd = (ce.eval(f + h, y) - ce.eval(f - h, y)) / (2.0 * h);
                assert!((fd - ce.derivative(f, y)).abs() < 1e-8);
                let fd = (sq.eval(f + h, y) - sq.eval(f - h, y)) / (2.0 * h);
                assert!((fd - sq.derivative(f, y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn generalization_bound_examples() {
        // B = (y_bound + f_bound)^2 = 1 with y_bound = 0.5 and f_bound = 0.5
        let spec = NetworkSpec::linear(2, 0.5, 1.0).unwrap();
        let loss = LossSpec::square(0.5);
        let delta = 2.0 * (-4.0f64).exp();
        let e = generalization_bound(0.0, 0.0, &loss, &spec, delta, 100, BoundVariant::Expected).unwrap();
        assert!((e.loss_bound - 1.0).abs() < 1e-15);
        assert!((e.total_bound - 0.2).abs() < 1e-12);
        let m = generalization_bound(0.0, 0.0, &loss, &spec, delta, 100, BoundVariant::Empirical).unwrap();
        assert!((m.total_bound - 0.6).abs() < 1e-12);

        let spec = NetworkSpec::linear(2, 1.0, 1.0).unwrap();
        let r = generalization_bound(0.1, 0.05, &LossSpec::square(1.0), &spec, 0.05, 50, BoundVariant::Expected)
            .unwrap();
        assert_eq!(r.loss_bound, 4.0);
        assert_eq!(r.loss_lipschitz, 4.0);
        assert!((r.total_bound - (0.1 + 2.0 * 4.0 * 0.05 + r.mcdiarmid_term)).abs() < 1e-15);
    }

    #[test]
    fn variant_difference() {
        let spec = deep(2);
        let loss = LossSpec::square(1.0);
        for (delta, n) in [(0.05, 10usize), (0.5, 1000), (0.01, 7)] {
            let e = generalization_bound(0.3, 0.2, &loss, &spec, delta, n, BoundVariant::Expected).unwrap();
            let m = generalization_bound(0.3, 0.2, &loss, &spec, delta, n, BoundVariant::Empirical).unwrap();
            let expected = 2.0 * e.loss_bound * ((2.0 / delta).ln() / n as f64).sqrt();
            assert!((m.total_bound - e.total_bound - expected).abs() < 1e-12);
        }
    }
}
