//! Minibatch SGD with per-example dropout masks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bounds::LossSpec;
use crate::error::{Error, Result};
use crate::masks::{sample_masks_with, validate_rho, DropoutType, MaskBundle};
use crate::net::{project_weights_in_place, NetworkSpec, WeightAssignment};
use crate::propagate::Propagator;
use crate::rng::stream_rng;

const INIT_STREAM: u64 = 20;
const SHUFFLE_STREAM: u64 = 21;
const MASK_STREAM: u64 = 22;
const RISK_MASK_STREAM: u64 = 23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default = "one")]
    pub batch_size: usize,
    pub loss: LossSpec,
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    pub dropout_type: DropoutType,
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    /// Confidence parameter of the gap experiment.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    /// Fresh `(x, y, mask)` draws for the held-out risk.
    #[serde(default = "default_holdout")]
    pub holdout_samples: usize,
    /// Half-width of the uniform label noise in the synthetic task.
    #[serde(default = "default_noise")]
    pub label_noise: f64,
}

fn one() -> usize {
    1
}
fn default_delta() -> f64 {
    0.05
}
fn default_trials() -> usize {
    100
}
fn default_holdout() -> usize {
    10_000
}
fn default_noise() -> f64 {
    0.1
}

impl TrainConfig {
    pub fn new(loss: LossSpec, dropout_type: DropoutType, rho: f64) -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.05,
            batch_size: 1,
            loss,
            n_train: 64,
            n_test: 0,
            dropout_type,
            rho,
            seed: 0,
            delta: default_delta(),
            n_trials: default_trials(),
            holdout_samples: default_holdout(),
            label_noise: default_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.n_train == 0 {
            return Err(Error::invalid("n_train", "must be at least 1"));
        }
        if !(self.label_noise >= 0.0 && self.label_noise.is_finite()) {
            return Err(Error::invalid("label_noise", "must be nonnegative"));
        }
        validate_rho(self.rho)?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::shape("labels", xs.len(), ys.len()));
        }
        if xs.is_empty() {
            return Err(Error::invalid("data", "dataset is empty"));
        }
        Ok(Dataset { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.xs.is_empty() {
            return Err(Error::invalid("data", "dataset is empty"));
        }
        if self.xs.len() != self.ys.len() {
            return Err(Error::shape("labels", self.xs.len(), self.ys.len()));
        }
        for (i, x) in self.xs.iter().enumerate() {
            if x.len() != spec.input_dim {
                return Err(Error::shape(format!("input {i}"), spec.input_dim, x.len()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: WeightAssignment,
    /// Training risk after each epoch.
    pub risk: Vec<f64>,
    /// The fixed masks `RS_n` the risk is measured with (`None` for plain
    /// training).
    pub risk_masks: Option<Vec<MaskBundle>>,
}

/// Mean loss over `data`, masked by `masks[i]` when given.
pub fn empirical_risk(
    spec: &NetworkSpec,
    w: &WeightAssignment,
    data: &Dataset,
    masks: Option<&[MaskBundle]>,
    loss: &LossSpec,
) -> f64 {
    let mut prop = Propagator::new(spec);
    let total: f64 = data
        .xs
        .iter()
        .zip(&data.ys)
        .enumerate()
        .map(|(i, (x, &y))| {
            let f = prop.forward(spec, w, x, masks.map(|m| &m[i]));
            loss.eval(f, y)
        })
        .sum();
    total / data.len() as f64
}

/// Trains from a seeded random feasible start. Each example gets a fresh
/// mask bundle every time it is visited; weights are projected back onto
/// the constraint set at the end of every epoch.
pub fn train_with_dropout(spec: &NetworkSpec, data: &Dataset, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    train(spec, data, tcfg, Some((tcfg.dropout_type, tcfg.rho)))
}

/// Same schedule without masks.
pub fn train_plain(spec: &NetworkSpec, data: &Dataset, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    train(spec, data, tcfg, None)
}

/// Initial weights used by both trainers for `seed`.
pub fn initial_weights(spec: &NetworkSpec, seed: u64) -> WeightAssignment {
    WeightAssignment::random_feasible(spec, &mut stream_rng(seed, &[INIT_STREAM]))
}

fn train(
    spec: &NetworkSpec,
    data: &Dataset,
    tcfg: &TrainConfig,
    dropout: Option<(DropoutType, f64)>,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    data.check(spec)?;
    let n = data.len();
    let mut w = initial_weights(spec, tcfg.seed);
    let mut shuffle_rng = stream_rng(tcfg.seed, &[SHUFFLE_STREAM]);
    let mut mask_rng = stream_rng(tcfg.seed, &[MASK_STREAM]);
    let risk_masks: Option<Vec<MaskBundle>> = dropout.map(|(kind, rho)| {
        let mut rng = stream_rng(tcfg.seed, &[RISK_MASK_STREAM]);
        (0..n).map(|_| sample_masks_with(spec, kind, rho, &mut rng)).collect()
    });
    let mut prop = Propagator::new(spec);
    let mut grad = vec![0.0; w.as_slice().len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut risk = Vec::with_capacity(tcfg.epochs);
    for _ in 0..tcfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(tcfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let masks = dropout.map(|(kind, rho)| sample_masks_with(spec, kind, rho, &mut mask_rng));
                let f = prop.forward(spec, &w, &data.xs[i], masks.as_ref());
                let dl = tcfg.loss.derivative(f, data.ys[i]);
                prop.backward(spec, &w, masks.as_ref(), scale * dl, &mut grad);
            }
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(&grad) {
                *wi -= tcfg.learning_rate * gi;
            }
        }
        project_weights_in_place(&mut w, spec)?;
        let r = empirical_risk(spec, &w, data, risk_masks.as_deref(), &tcfg.loss);
        risk.push(r);
        if !r.is_finite() {
            return Err(Error::Diverged(format!("non-finite training risk; trajectory {risk:?}")));
        }
    }
    Ok(TrainOutcome {
        weights: w,
        risk,
        risk_masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use rand::Rng;

    fn regression(spec: &NetworkSpec, n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, &[0]);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..spec.input_dim).map(|_| rng.random_range(-1.0..1.0) / (spec.input_dim as f64).sqrt()).collect())
            .collect();
        let ys = xs.iter().map(|x| 0.5 * x.iter().sum::<f64>().tanh()).collect();
        Dataset::new(xs, ys).unwrap()
    }

    fn cfg(rho: f64) -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch_size: 4,
            n_train: 32,
            seed: 3,
            ..TrainConfig::new(LossSpec::square(1.0), DropoutType::III, rho)
        }
    }

    #[test]
    fn full_keep_matches_plain_sgd() {
        let spec = NetworkSpec::new(3, vec![4], vec![1.0, 1.0], Activation::Tanh, 1.0).unwrap();
        let data = regression(&spec, 32, 1);
        for kind in DropoutType::ALL {
            let c = TrainConfig { dropout_type: kind, ..cfg(1.0) };
            let a = train_with_dropout(&spec, &data, &c).unwrap();
            let b = train_plain(&spec, &data, &c).unwrap();
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.risk, b.risk);
        }
    }

    #[test]
    fn linear_regression_descends() {
        let spec = NetworkSpec::linear(1, 4.0, 1.0).unwrap();
        let mut rng = stream_rng(7, &[0]);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let ys = xs.iter().map(|x| 0.7 * x[0]).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let c = TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            ..cfg(1.0)
        };
        let out = train_with_dropout(&spec, &data, &c).unwrap();
        for pair in out.risk[1..].windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "{:?}", out.risk);
        }
        assert!((out.weights.as_slice()[0] - 0.7).abs() < 0.1);
    }

    #[test]
    fn zero_keep_freezes_weights() {
        let spec = NetworkSpec::new(3, vec![4], vec![1.0, 1.0], Activation::Tanh, 1.0).unwrap();
        let data = regression(&spec, 16, 2);
        for kind in DropoutType::ALL {
            let c = TrainConfig { dropout_type: kind, ..cfg(0.0) };
            let out = train_with_dropout(&spec, &data, &c).unwrap();
            assert_eq!(out.weights, initial_weights(&spec, c.seed));
        }
    }

    #[test]
    fn weights_stay_feasible() {
        let spec = NetworkSpec::new(3, vec![4], vec![0.5, 0.5], Activation::Relu, 1.0).unwrap();
        let data = regression(&spec, 32, 4);
        let c = TrainConfig { learning_rate: 1.0, ..cfg(0.5) };
        let out = train_with_dropout(&spec, &data, &c).unwrap();
        assert!(out.weights.is_feasible(&spec, 1e-12));
        assert_eq!(out.risk.len(), c.epochs);
    }

    #[test]
    fn divergence_is_reported() {
        let spec = NetworkSpec::linear(2, 1.0, 1.0).unwrap();
        let data = Dataset::new(vec![vec![f64::INFINITY, 0.0]], vec![0.0]).unwrap();
        let err = train_with_dropout(&spec, &data, &cfg(1.0)).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err}");
    }

    #[test]
    fn bad_inputs_fail() {
        let spec = NetworkSpec::linear(2, 1.0, 1.0).unwrap();
        let data = Dataset::new(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        assert!(train_plain(&spec, &data, &TrainConfig { learning_rate: 0.0, ..cfg(1.0) }).is_err());
        assert!(train_plain(&spec, &data, &TrainConfig { epochs: 0, ..cfg(1.0) }).is_err());
        let wrong = Dataset::new(vec![vec![1.0]], vec![0.0]).unwrap();
        assert!(train_plain(&spec, &wrong, &cfg(1.0)).is_err());
        assert!(Dataset::new(vec![], vec![]).is_err());
    }
}
