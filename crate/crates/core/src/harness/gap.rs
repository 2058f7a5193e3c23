//! Generalization-gap experiment on a synthetic teacher-student
//! regression task.
//!
//! The task is our own construction: inputs are uniform on the sphere of
//! radius `B̂`, labels are a fixed random feasible teacher network plus
//! uniform noise, clipped to `[-y_bound, y_bound]`. Each trial trains a
//! student with dropout, measures its empirical dropout risk on the
//! training sample and fixed masks, and compares a fresh Monte Carlo
//! estimate of the expected risk against the bound's right-hand side.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{generalization_bound, theoretical_complexity_bound, BoundVariant, LossSpec};
use crate::data::{DataDistribution, DistributionKind, InputSampler};
use crate::error::{Error, Result};
use crate::estimator::mean_and_std_error;
use crate::harness::train::{empirical_risk, train_with_dropout, Dataset, TrainConfig};
use crate::masks::{sample_masks_with, DropoutType, MaskBundle};
use crate::net::{NetworkSpec, WeightAssignment};
use crate::propagate::Propagator;
use crate::rng::{derive_seed, stream_rng};

const TEACHER_STREAM: u64 = 30;
const TRAIN_DATA_STREAM: u64 = 31;
const HOLDOUT_STREAM: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub spec: NetworkSpec,
    pub teacher: WeightAssignment,
    pub noise: f64,
    pub y_bound: f64,
}

impl SyntheticTask {
    pub fn new(spec: &NetworkSpec, noise: f64, y_bound: f64, seed: u64) -> Self {
        let teacher = WeightAssignment::random_feasible(spec, &mut stream_rng(seed, &[TEACHER_STREAM]));
        SyntheticTask {
            spec: spec.clone(),
            teacher,
            noise,
            y_bound,
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut rand_chacha::ChaCha8Rng, noise_rng: &mut R) -> Dataset {
        let dist = DataDistribution::new(DistributionKind::UnitSphere, self.spec.input_dim, self.spec.input_bound);
        let xs = dist.sample_inputs(n, rng);
        let mut prop = Propagator::new(&self.spec);
        let ys = xs
            .iter()
            .map(|x| {
                let clean = prop.forward(&self.spec, &self.teacher, x, None);
                let e = if self.noise > 0.0 {
                    noise_rng.random_range(-self.noise..=self.noise)
                } else {
                    0.0
                };
                (clean + e).clamp(-self.y_bound, self.y_bound)
            })
            .collect();
        Dataset { xs, ys }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrial {
    pub trial: usize,
    pub seed: u64,
    pub empirical_risk: f64,
    pub heldout_risk: f64,
    pub heldout_std_error: f64,
    pub right_hand_side: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub delta: f64,
    pub n: usize,
    pub rho: f64,
    pub dropout_type: DropoutType,
    pub complexity_bound: f64,
    pub trials: Vec<GapTrial>,
    pub n_holds: usize,
    pub pass_fraction: f64,
}

/// Monte Carlo estimate of the expected dropout risk over fresh
/// `(x, y, r)` triples: returns `(mean, std_error)`.
#[allow(clippy::too_many_arguments)]
pub fn heldout_risk(
    spec: &NetworkSpec,
    w: &WeightAssignment,
    task: &SyntheticTask,
    loss: &LossSpec,
    kind: DropoutType,
    rho: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut data_rng = stream_rng(seed, &[HOLDOUT_STREAM, 0]);
    let mut noise_rng = stream_rng(seed, &[HOLDOUT_STREAM, 1]);
    let mut mask_rng = stream_rng(seed, &[HOLDOUT_STREAM, 2]);
    let data = task.sample(samples, &mut data_rng, &mut noise_rng);
    let mut prop = Propagator::new(spec);
    let losses: Vec<f64> = data
        .xs
        .iter()
        .zip(&data.ys)
        .map(|(x, &y)| {
            let m = sample_masks_with(spec, kind, rho, &mut mask_rng);
            loss.eval(prop.forward(spec, w, x, Some(&m)), y)
        })
        .collect();
    mean_and_std_error(&losses)
}

/// Scores fixed weights: empirical dropout risk on `(data, masks)`, the
/// held-out risk, and the right-hand side assembled from the theoretical
/// complexity bound.
#[allow(clippy::too_many_arguments)]
pub fn assess_weights(
    spec: &NetworkSpec,
    w: &WeightAssignment,
    task: &SyntheticTask,
    data: &Dataset,
    masks: &[MaskBundle],
    tcfg: &TrainConfig,
    trial: usize,
    seed: u64,
) -> Result<GapTrial> {
    let complexity = theoretical_complexity_bound(spec, tcfg.dropout_type, tcfg.rho, data.len())?;
    let r_hat = empirical_risk(spec, w, data, Some(masks), &tcfg.loss);
    let (heldout, se) = heldout_risk(
        spec,
        w,
        task,
        &tcfg.loss,
        tcfg.dropout_type,
        tcfg.rho,
        tcfg.holdout_samples,
        seed,
    );
    let report = generalization_bound(
        r_hat,
        complexity,
        &tcfg.loss,
        spec,
        tcfg.delta,
        data.len(),
        BoundVariant::Expected,
    )?;
    Ok(GapTrial {
        trial,
        seed,
        empirical_risk: r_hat,
        heldout_risk: heldout,
        heldout_std_error: se,
        right_hand_side: report.total_bound,
        holds: heldout <= report.total_bound,
    })
}

/// Runs `n_trials` seeded trials (trial `t` uses seed
/// `derive_seed(tcfg.seed, [t])` for teacher, data, masks and training).
pub fn gap_experiment(spec: &NetworkSpec, tcfg: &TrainConfig, delta: f64, n_trials: usize) -> Result<GapReport> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} is outside (0, 1)")));
    }
    if tcfg.holdout_samples == 0 {
        return Err(Error::invalid("holdout_samples", "must be at least 1"));
    }
    tcfg.validate()?;
    spec.validate()?;
    let tcfg = TrainConfig { delta, ..tcfg.clone() };
    let trials: Vec<GapTrial> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(tcfg.seed, &[t as u64]);
            let task = SyntheticTask::new(spec, tcfg.label_noise, tcfg.loss.y_bound, seed);
            let data = task.sample(
                tcfg.n_train,
                &mut stream_rng(seed, &[TRAIN_DATA_STREAM, 0]),
                &mut stream_rng(seed, &[TRAIN_DATA_STREAM, 1]),
            );
            let run_cfg = TrainConfig { seed, ..tcfg.clone() };
            let out = train_with_dropout(spec, &data, &run_cfg)?;
            let masks = out.risk_masks.as_deref().expect("dropout training keeps its masks");
            assess_weights(spec, &out.weights, &task, &data, masks, &run_cfg, t, seed)
        })
        .collect::<Result<_>>()?;
    let n_holds = trials.iter().filter(|t| t.holds).count();
    Ok(GapReport {
        delta,
        n: tcfg.n_train,
        rho: tcfg.rho,
        dropout_type: tcfg.dropout_type,
        complexity_bound: theoretical_complexity_bound(spec, tcfg.dropout_type, tcfg.rho, tcfg.n_train)?,
        n_holds,
        pass_fraction: n_holds as f64 / n_trials as f64,
        trials,
    })
}
