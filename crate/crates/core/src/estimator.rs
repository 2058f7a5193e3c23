//! Estimators of the generalized (dropout) Rademacher complexity.
//!
//! For a sample `x_1..x_n` with masks `r_1..r_n` and signs `ε`, the inner
//! quantity is `sup_w (1/n) Σ ε_i f(w, x_i, r_i)` over the feasible set.
//! Linear classes (`k = 0`) have the exact value
//! `(B/n)·||Σ ε_i x_i ⊙ r_i||`. Deeper classes are maximised by projected
//! gradient ascent from random boundary starts; every reported value is
//! the objective at a feasible point, so it never exceeds the true sup.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InputSampler;
use crate::error::{Error, Result};
use crate::masks::{effective_linear_mask, sample_masks_with, validate_rho, DropoutType, MaskBundle};
use crate::net::{NetworkSpec, WeightAssignment};
use crate::projection::{l2_norm, project_l1_ball, project_l2_ball};
use crate::propagate::Propagator;
use crate::rng::{derive_seed, rademacher_signs, stream_rng};

// stream tags below the estimator seed
const EPS_STREAM: u64 = 10;
const INIT_STREAM: u64 = 11;
const OUTER_DATA: u64 = 1;
const OUTER_MASKS: u64 = 2;
const OUTER_INNER: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Rademacher sign vectors per empirical estimate.
    pub n_epsilon_draws: usize,
    /// Ascent restarts per search branch.
    pub n_restarts: usize,
    pub ascent_steps: usize,
    /// Initial step, as a fraction of each vector's norm budget.
    pub step_size: f64,
    pub step_decay: f64,
    /// Fresh `(S_n, RS_n)` draws for the expected complexity.
    pub n_outer_replicates: usize,
    /// Replace an L1-constrained output layer by single `±B_k` paths.
    pub use_absconv_reduction: bool,
    /// Run the ascent even where the closed form applies (`k = 0`).
    pub force_ascent: bool,
    pub rng_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            n_epsilon_draws: 16,
            n_restarts: 10,
            ascent_steps: 500,
            step_size: 0.1,
            step_decay: 0.99,
            n_outer_replicates: 8,
            use_absconv_reduction: true,
            force_ascent: false,
            rng_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_epsilon_draws", self.n_epsilon_draws),
            ("n_restarts", self.n_restarts),
            ("ascent_steps", self.ascent_steps),
            ("n_outer_replicates", self.n_outer_replicates),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step_size", "must be positive"));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::invalid("step_decay", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    Ascent,
    AbsconvAscent,
}

/// Optimizer record for one sign draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawDiagnostics {
    pub route: Route,
    /// Best objective reached by each ascent run, in run order.
    pub restart_best: Vec<f64>,
    /// Best value found through the sign-flipped branch (`-ε`, or the
    /// `-B_k` output paths under the absconv reduction).
    pub flipped_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub point: f64,
    pub std_error: f64,
    pub n_replicates: usize,
    pub values: Vec<f64>,
    pub diagnostics: Vec<DrawDiagnostics>,
}

impl ComplexityEstimate {
    /// Mean and standard error (sample sd / sqrt(count), 0 for a single
    /// value), summed in index order.
    pub fn from_values(values: Vec<f64>, diagnostics: Vec<DrawDiagnostics>) -> Self {
        let (point, std_error) = mean_and_std_error(&values);
        ComplexityEstimate {
            point,
            std_error,
            n_replicates: values.len(),
            values,
            diagnostics,
        }
    }
}

pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(B/n)·||Σ ε_i x_i ⊙ r_i||`, the exact supremum of the linear class
/// over `||w|| <= B`. Type III callers pass `r_1 ⊙ r_2`.
pub fn closed_form_linear_sup(xs: &[Vec<f64>], masks: &[Vec<u8>], eps: &[f64], budget: f64) -> Result<f64> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::invalid("sample", "n must be at least 1"));
    }
    if masks.len() != n {
        return Err(Error::shape("masks: sample size", n, masks.len()));
    }
    if eps.len() != n {
        return Err(Error::shape("signs: sample size", n, eps.len()));
    }
    if let Some(e) = eps.iter().find(|&&e| e != 1.0 && e != -1.0) {
        return Err(Error::invalid("signs", format!("{e} is not ±1")));
    }
    let d = xs[0].len();
    let mut sum = vec![0.0; d];
    for (i, ((x, r), &e)) in xs.iter().zip(masks).zip(eps).enumerate() {
        if x.len() != d {
            return Err(Error::shape(format!("input x_{i}"), d, x.len()));
        }
        if r.len() != d {
            return Err(Error::shape(format!("mask r_{i}"), d, r.len()));
        }
        for ((s, &xv), &rv) in sum.iter_mut().zip(x).zip(r) {
            *s += e * (xv * f64::from(rv));
        }
    }
    Ok(budget / n as f64 * l2_norm(&sum))
}

/// The sign vector used for draw `index` under `cfg`.
pub fn epsilon_draw(cfg: &EstimatorConfig, index: usize, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(cfg.rng_seed, &[EPS_STREAM, index as u64]);
    rademacher_signs(&mut rng, n)
}

/// `J(w) = (1/n) Σ ε_i f(w, x_i, r_i)` for a fixed sample, masks and signs.
pub struct InnerObjective<'a> {
    spec: &'a NetworkSpec,
    xs: &'a [Vec<f64>],
    masks: &'a [MaskBundle],
    coeffs: Vec<f64>,
}

impl<'a> InnerObjective<'a> {
    pub fn new(
        spec: &'a NetworkSpec,
        xs: &'a [Vec<f64>],
        masks: &'a [MaskBundle],
        eps: &[f64],
    ) -> Result<Self> {
        check_sample(spec, xs, masks)?;
        if eps.len() != xs.len() {
            return Err(Error::shape("signs: sample size", xs.len(), eps.len()));
        }
        let n = xs.len() as f64;
        Ok(InnerObjective {
            spec,
            xs,
            masks,
            coeffs: eps.iter().map(|e| e / n).collect(),
        })
    }

    fn flipped(&self) -> Self {
        InnerObjective {
            spec: self.spec,
            xs: self.xs,
            masks: self.masks,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn value(&self, w: &WeightAssignment) -> f64 {
        self.value_with(&mut Propagator::new(self.spec), w)
    }

    pub fn value_and_gradient(&self, w: &WeightAssignment) -> (f64, WeightAssignment) {
        let mut grad = WeightAssignment::zeros(self.spec);
        let v = self.value_and_gradient_with(&mut Propagator::new(self.spec), w, grad.as_mut_slice());
        (v, grad)
    }

    /// Smallest live hidden pre-activation magnitude over the sample; relu
    /// gradients are only classical away from zero.
    pub fn kink_margin(&self, w: &WeightAssignment) -> f64 {
        let mut prop = Propagator::new(self.spec);
        self.xs
            .iter()
            .zip(self.masks)
            .map(|(x, m)| {
                prop.forward(self.spec, w, x, Some(m));
                prop.live_preactivation_margin(self.spec, w, Some(m))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn value_with(&self, prop: &mut Propagator, w: &WeightAssignment) -> f64 {
        self.xs
            .iter()
            .zip(self.masks)
            .zip(&self.coeffs)
            .map(|((x, m), c)| c * prop.forward(self.spec, w, x, Some(m)))
            .sum()
    }

    fn value_and_gradient_with(&self, prop: &mut Propagator, w: &WeightAssignment, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for ((x, m), &c) in self.xs.iter().zip(self.masks).zip(&self.coeffs) {
            total += c * prop.forward(self.spec, w, x, Some(m));
            prop.backward(self.spec, w, Some(m), c, grad);
        }
        total
    }
}

fn check_sample(spec: &NetworkSpec, xs: &[Vec<f64>], masks: &[MaskBundle]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid("sample", "n must be at least 1"));
    }
    if masks.len() != xs.len() {
        return Err(Error::shape("masks: sample size", xs.len(), masks.len()));
    }
    for (i, (x, m)) in xs.iter().zip(masks).enumerate() {
        if x.len() != spec.input_dim {
            return Err(Error::shape(format!("input x_{i}"), spec.input_dim, x.len()));
        }
        m.check_shape(spec)?;
    }
    Ok(())
}

/// Projected ascent with per-vector normalised steps of length
/// `step·B_j`; returns the best objective seen at a feasible iterate.
fn ascend(
    obj: &InnerObjective<'_>,
    mut w: WeightAssignment,
    cfg: &EstimatorConfig,
    freeze_top: bool,
    prop: &mut Propagator,
    grad: &mut [f64],
) -> Result<f64> {
    let spec = obj.spec;
    let k = spec.depth();
    let layout = w.layout().clone();
    let movable = if freeze_top { k } else { k + 1 };
    let mut step = cfg.step_size;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..cfg.ascent_steps {
        let v = obj.value_and_gradient_with(prop, &w, grad);
        if !v.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite objective {v} after reaching best {best}"
            )));
        }
        best = best.max(v);
        let data = w.as_mut_slice();
        for j in 0..movable {
            let radius = spec.budgets[j];
            for u in 0..layout.layer(j).count {
                let range = layout.range(j, u);
                let g = &grad[range.clone()];
                let norm = l2_norm(g);
                if norm == 0.0 || !norm.is_finite() {
                    continue;
                }
                let scale = step * radius / norm;
                let v = &mut data[range];
                v.iter_mut().zip(g).for_each(|(x, gi)| *x += scale * gi);
                if j == 0 {
                    project_l2_ball(v, radius);
                } else {
                    project_l1_ball(v, radius);
                }
            }
        }
        step *= cfg.step_decay;
    }
    let v = obj.value_with(prop, &w);
    if !v.is_finite() {
        return Err(Error::Diverged(format!("non-finite final objective {v}")));
    }
    Ok(best.max(v))
}

struct DrawOutcome {
    value: f64,
    diagnostics: DrawDiagnostics,
}

fn sup_for_draw(
    spec: &NetworkSpec,
    xs: &[Vec<f64>],
    masks: &[MaskBundle],
    cfg: &EstimatorConfig,
    draw: usize,
) -> Result<DrawOutcome> {
    let n = xs.len();
    let eps = epsilon_draw(cfg, draw, n);
    let k = spec.depth();

    if k == 0 && !cfg.force_ascent {
        let eff: Vec<Vec<u8>> = masks.iter().map(effective_linear_mask).collect();
        let value = closed_form_linear_sup(xs, &eff, &eps, spec.budgets[0])?;
        return Ok(DrawOutcome {
            value,
            diagnostics: DrawDiagnostics {
                route: Route::ClosedForm,
                restart_best: Vec::new(),
                flipped_best: None,
            },
        });
    }

    let obj = InnerObjective::new(spec, xs, masks, &eps)?;
    let mut prop = Propagator::new(spec);
    let mut grad = vec![0.0; spec.layout().total()];
    let init = |path: &[u64]| {
        let mut full = vec![INIT_STREAM, draw as u64];
        full.extend_from_slice(path);
        let mut rng = stream_rng(cfg.rng_seed, &full);
        WeightAssignment::random_on_boundary(spec, &mut rng)
    };
    let mut restart_best = Vec::new();
    let mut flipped_best = f64::NEG_INFINITY;

    let route = if k >= 1 && cfg.use_absconv_reduction {
        // sup over the L1 output ball is attained at a signed vertex
        let top_width = spec.widths[k - 1];
        let b_top = spec.budgets[k];
        for unit in 0..top_width {
            for (branch, sign) in [(0u64, 1.0), (1u64, -1.0)] {
                for r in 0..cfg.n_restarts {
                    let mut w = init(&[unit as u64, branch, r as u64]);
                    let top = w.vector_mut(k, 0);
                    top.iter_mut().for_each(|t| *t = 0.0);
                    top[unit] = sign * b_top;
                    let v = ascend(&obj, w, cfg, true, &mut prop, &mut grad)?;
                    restart_best.push(v);
                    if sign < 0.0 {
                        flipped_best = flipped_best.max(v);
                    }
                }
            }
        }
        Route::AbsconvAscent
    } else {
        let flipped = obj.flipped();
        for r in 0..cfg.n_restarts {
            let v = ascend(&obj, init(&[0, r as u64]), cfg, false, &mut prop, &mut grad)?;
            restart_best.push(v);
            // sup_w J_{-ε}(w) = sup_w J_ε(w') with the output layer negated
            let f = ascend(&flipped, init(&[1, r as u64]), cfg, false, &mut prop, &mut grad)?;
            flipped_best = flipped_best.max(f);
        }
        Route::Ascent
    };

    let zero = obj.value_with(&mut prop, &WeightAssignment::zeros(spec));
    let value = restart_best
        .iter()
        .copied()
        .fold(zero.max(flipped_best), f64::max);
    Ok(DrawOutcome {
        value,
        diagnostics: DrawDiagnostics {
            route,
            restart_best,
            flipped_best: Some(flipped_best),
        },
    })
}

/// Empirical complexity for a fixed sample and mask sample, averaged over
/// `cfg.n_epsilon_draws` sign vectors. Linear networks use the closed form
/// unless `cfg.force_ascent` is set.
pub fn estimate_empirical_rademacher(
    spec: &NetworkSpec,
    kind: DropoutType,
    xs: &[Vec<f64>],
    masks: &[MaskBundle],
    cfg: &EstimatorConfig,
) -> Result<ComplexityEstimate> {
    cfg.validate()?;
    check_sample(spec, xs, masks)?;
    if let Some(m) = masks.iter().find(|m| m.dropout_type() != kind) {
        return Err(Error::invalid(
            "masks",
            format!("expected type {kind} masks, got type {}", m.dropout_type()),
        ));
    }
    let outcomes: Vec<DrawOutcome> = (0..cfg.n_epsilon_draws)
        .into_par_iter()
        .map(|t| sup_for_draw(spec, xs, masks, cfg, t))
        .collect::<Result<_>>()?;
    let (values, diagnostics) = outcomes
        .into_iter()
        .map(|o| (o.value, o.diagnostics))
        .unzip();
    Ok(ComplexityEstimate::from_values(values, diagnostics))
}

/// Expected complexity: the empirical estimate averaged over
/// `cfg.n_outer_replicates` fresh samples and mask samples.
pub fn estimate_expected_rademacher(
    spec: &NetworkSpec,
    kind: DropoutType,
    sampler: &dyn InputSampler,
    rho: f64,
    n: usize,
    cfg: &EstimatorConfig,
) -> Result<ComplexityEstimate> {
    cfg.validate()?;
    validate_rho(rho)?;
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    let inner: Vec<ComplexityEstimate> = (0..cfg.n_outer_replicates)
        .into_par_iter()
        .map(|r| {
            let (xs, masks) = draw_sample(spec, kind, sampler, rho, n, cfg.rng_seed, r as u64);
            let inner_cfg = EstimatorConfig {
                rng_seed: derive_seed(cfg.rng_seed, &[OUTER_INNER, r as u64]),
                ..cfg.clone()
            };
            estimate_empirical_rademacher(spec, kind, &xs, &masks, &inner_cfg)
        })
        .collect::<Result<_>>()?;
    let values = inner.iter().map(|e| e.point).collect();
    let diagnostics = inner.into_iter().flat_map(|e| e.diagnostics).collect();
    Ok(ComplexityEstimate::from_values(values, diagnostics))
}

/// The `(S_n, RS_n)` pair of outer replicate `replicate`.
pub fn draw_sample(
    spec: &NetworkSpec,
    kind: DropoutType,
    sampler: &dyn InputSampler,
    rho: f64,
    n: usize,
    seed: u64,
    replicate: u64,
) -> (Vec<Vec<f64>>, Vec<MaskBundle>) {
    let mut data_rng = stream_rng(seed, &[OUTER_DATA, replicate]);
    let xs = sampler.sample_inputs(n, &mut data_rng);
    let mut mask_rng = stream_rng(seed, &[OUTER_MASKS, replicate]);
    let masks = (0..n)
        .map(|_| sample_masks_with(spec, kind, rho, &mut mask_rng))
        .collect();
    (xs, masks)
}

/// Draws feasible probe weights and returns the best objective among
/// them; a cheap lower bound used to sanity-check the ascent.
pub fn best_probe_value<R: Rng>(obj: &InnerObjective<'_>, probes: usize, rng: &mut R) -> f64 {
    let mut prop = Propagator::new(obj.spec);
    (0..probes)
        .map(|_| obj.value_with(&mut prop, &WeightAssignment::random_feasible(obj.spec, rng)))
        .fold(f64::NEG_INFINITY, f64::max)
}
