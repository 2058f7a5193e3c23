//! Network architecture, weights, activations and the dropout-free
//! forward pass.
//!
//! A network with `k` hidden layers has weight layers `0..=k`. Layer `j`
//! holds `widths[j]` vectors (one per unit of hidden layer `j + 1`) for
//! `j < k`, and a single output vector for `j = k`. Each vector in layer
//! `j` has the length of `Psi_j`: the input dimension for `j = 0`, the
//! width of hidden layer `j` otherwise. Layer-0 vectors live in an L2
//! ball of radius `budgets[0]`; every other layer uses L1 balls. With
//! `k = 0` the single vector is L2-constrained by `budgets[0]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{l1_norm, l2_norm, project_l1_ball, project_l2_ball};
use crate::propagate::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    CenteredSigmoid,
    Relu,
    Identity,
}

/// Static facts about an activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationInfo {
    pub kind: Activation,
    pub lipschitz: f64,
    pub value_at_zero: f64,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Tanh,
        Activation::CenteredSigmoid,
        Activation::Relu,
        Activation::Identity,
    ];

    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Activation::Tanh => t.tanh(),
            // 1/(1+e^-t) - 1/2, written in the numerically stable form
            Activation::CenteredSigmoid => 0.5 * (0.5 * t).tanh(),
            Activation::Relu => t.max(0.0),
            Activation::Identity => t,
        }
    }

    /// Derivative, with the relu subgradient at 0 fixed to 0.
    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Activation::CenteredSigmoid => {
                let th = (0.5 * t).tanh();
                0.25 * (1.0 - th * th)
            }
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::CenteredSigmoid => 0.25,
            _ => 1.0,
        }
    }

    pub fn info(self) -> ActivationInfo {
        ActivationInfo {
            kind: self,
            lipschitz: self.lipschitz(),
            value_at_zero: self.eval(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::CenteredSigmoid => "centered_sigmoid",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl ActivationInfo {
    pub fn eval(&self, t: f64) -> f64 {
        self.kind.eval(t)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid("activation", format!("unknown kind `{s}`")))
    }
}

/// Architecture and norm budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    /// Hidden layer widths `m_1..m_k`; empty for the linear class.
    #[serde(default)]
    pub widths: Vec<usize>,
    /// `B_0..B_k`; `budgets[0]` is an L2 radius, the rest are L1 radii.
    pub budgets: Vec<f64>,
    pub activation: Activation,
    /// L2 bound on inputs.
    pub input_bound: f64,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        widths: Vec<usize>,
        budgets: Vec<f64>,
        activation: Activation,
        input_bound: f64,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            input_dim,
            widths,
            budgets,
            activation,
            input_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Linear class `{x -> <w, x> : ||w|| <= budget}`.
    pub fn linear(input_dim: usize, budget: f64, input_bound: f64) -> Result<Self> {
        Self::new(
            input_dim,
            Vec::new(),
            vec![budget],
            Activation::Identity,
            input_bound,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be at least 1"));
        }
        if let Some(i) = self.widths.iter().position(|&m| m == 0) {
            return Err(Error::invalid(
                "widths",
                format!("hidden layer {} has width 0", i + 1),
            ));
        }
        if self.budgets.len() != self.depth() + 1 {
            return Err(Error::shape(
                "budgets (one per weight layer)",
                self.depth() + 1,
                self.budgets.len(),
            ));
        }
        if let Some(j) = self
            .budgets
            .iter()
            .position(|&b| !(b.is_finite() && b > 0.0))
        {
            return Err(Error::invalid(
                "budgets",
                format!("budget B_{j} = {} must be positive", self.budgets[j]),
            ));
        }
        if !(self.input_bound.is_finite() && self.input_bound > 0.0) {
            return Err(Error::invalid("input_bound", "must be positive"));
        }
        Ok(())
    }

    /// Number of hidden layers `k`.
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn lipschitz(&self) -> f64 {
        self.activation.lipschitz()
    }

    /// Length of `Psi_j`, the input to weight layer `j`.
    pub fn layer_input_len(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.widths[layer - 1]
        }
    }

    /// Number of weight vectors in layer `j`.
    pub fn layer_vector_count(&self, layer: usize) -> usize {
        if layer < self.depth() {
            self.widths[layer]
        } else {
            1
        }
    }

    pub fn layer_norm(&self, layer: usize) -> Norm {
        if layer == 0 {
            Norm::L2
        } else {
            Norm::L1
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    /// Same template with `k` hidden layers. Widths and budgets beyond the
    /// template's are filled by repeating its last hidden entry.
    pub fn with_depth(&self, k: usize) -> Result<Self> {
        if k > 0 && self.widths.is_empty() {
            return Err(Error::invalid(
                "widths",
                "template needs at least one hidden width to derive deeper networks",
            ));
        }
        let widths: Vec<usize> = (0..k)
            .map(|i| *self.widths.get(i).unwrap_or_else(|| self.widths.last().unwrap()))
            .collect();
        let budgets: Vec<f64> = (0..=k)
            .map(|j| *self.budgets.get(j).unwrap_or_else(|| self.budgets.last().unwrap()))
            .collect();
        NetworkSpec::new(
            self.input_dim,
            widths,
            budgets,
            self.activation,
            self.input_bound,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// Flat storage layout of a weight assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    layers: Vec<LayerShape>,
    total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub count: usize,
    pub len: usize,
    pub offset: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut offset = 0;
        let layers = (0..=spec.depth())
            .map(|j| {
                let shape = LayerShape {
                    count: spec.layer_vector_count(j),
                    len: spec.layer_input_len(j),
                    offset,
                };
                offset += shape.count * shape.len;
                shape
            })
            .collect();
        Layout {
            layers,
            total: offset,
        }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn layer(&self, j: usize) -> LayerShape {
        self.layers[j]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn range(&self, layer: usize, unit: usize) -> std::ops::Range<usize> {
        let s = self.layers[layer];
        let start = s.offset + unit * s.len;
        start..start + s.len
    }

    pub(crate) fn check_against(&self, spec: &NetworkSpec, what: &str) -> Result<()> {
        let expected = spec.layout();
        if expected.layers.len() != self.layers.len() {
            return Err(Error::shape(
                format!("{what}: number of weight layers"),
                expected.layers.len(),
                self.layers.len(),
            ));
        }
        for (j, (e, a)) in expected.layers.iter().zip(&self.layers).enumerate() {
            if e.count != a.count {
                return Err(Error::shape(
                    format!("{what}: layer {j} vector count"),
                    e.count,
                    a.count,
                ));
            }
            if e.len != a.len {
                return Err(Error::shape(
                    format!("{what}: layer {j} vector length"),
                    e.len,
                    a.len,
                ));
            }
        }
        Ok(())
    }
}

/// Concrete weights `w = (w^[k]_1, w^[k-1]_1.., ..., w^[0]_1..)`,
/// stored flat layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    layout: Layout,
    data: Vec<f64>,
}

impl WeightAssignment {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layout = spec.layout();
        let data = vec![0.0; layout.total()];
        WeightAssignment { layout, data }
    }

    /// Builds from nested vectors `layers[j][u]`, checking every shape.
    pub fn from_layers(spec: &NetworkSpec, layers: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let layout = spec.layout();
        if layers.len() != layout.layers().len() {
            return Err(Error::shape(
                "weights: number of weight layers",
                layout.layers().len(),
                layers.len(),
            ));
        }
        let mut data = Vec::with_capacity(layout.total());
        for (j, (shape, vectors)) in layout.layers().iter().zip(&layers).enumerate() {
            if vectors.len() != shape.count {
                return Err(Error::shape(
                    format!("weights: layer {j} vector count"),
                    shape.count,
                    vectors.len(),
                ));
            }
            for (u, v) in vectors.iter().enumerate() {
                if v.len() != shape.len {
                    return Err(Error::shape(
                        format!("weights: layer {j} vector {u} length"),
                        shape.len,
                        v.len(),
                    ));
                }
                data.extend_from_slice(v);
            }
        }
        Ok(WeightAssignment { layout, data })
    }

    pub fn from_flat(spec: &NetworkSpec, data: Vec<f64>) -> Result<Self> {
        let layout = spec.layout();
        if data.len() != layout.total() {
            return Err(Error::shape("weights: flat length", layout.total(), data.len()));
        }
        Ok(WeightAssignment { layout, data })
    }

    pub fn to_layers(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.layout.layers().len())
            .map(|j| {
                (0..self.layout.layer(j).count)
                    .map(|u| self.vector(j, u).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn vector(&self, layer: usize, unit: usize) -> &[f64] {
        &self.data[self.layout.range(layer, unit)]
    }

    pub fn vector_mut(&mut self, layer: usize, unit: usize) -> &mut [f64] {
        let r = self.layout.range(layer, unit);
        &mut self.data[r]
    }

    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        self.layout.check_against(spec, "weights")
    }

    /// True when every vector lies in its ball (up to `tol` relative slack).
    pub fn is_feasible(&self, spec: &NetworkSpec, tol: f64) -> bool {
        self.layout.layers().iter().enumerate().all(|(j, s)| {
            (0..s.count).all(|u| {
                let v = self.vector(j, u);
                let n = match spec.layer_norm(j) {
                    Norm::L2 => l2_norm(v),
                    Norm::L1 => l1_norm(v),
                };
                n <= spec.budgets[j] * (1.0 + tol)
            })
        })
    }

    /// Every vector drawn uniformly on the boundary of its ball.
    pub fn random_on_boundary<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut w = Self::zeros(spec);
        for j in 0..=spec.depth() {
            let shape = w.layout.layer(j);
            for u in 0..shape.count {
                let v = w.vector_mut(j, u);
                match spec.layer_norm(j) {
                    Norm::L2 => sample_l2_sphere(v, spec.budgets[j], rng),
                    Norm::L1 => sample_l1_sphere(v, spec.budgets[j], rng),
                }
            }
        }
        w
    }

    /// Every vector drawn inside its ball with a uniformly random radius
    /// fraction; useful for property tests.
    pub fn random_feasible<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut w = Self::random_on_boundary(spec, rng);
        for j in 0..=spec.depth() {
            for u in 0..w.layout.layer(j).count {
                let s: f64 = rng.random();
                w.vector_mut(j, u).iter_mut().for_each(|x| *x *= s);
            }
        }
        w
    }
}

fn sample_l2_sphere<R: Rng + ?Sized>(v: &mut [f64], radius: f64, rng: &mut R) {
    loop {
        v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let n = l2_norm(v);
        if n > 1e-300 {
            v.iter_mut().for_each(|x| *x *= radius / n);
            return;
        }
    }
}

fn sample_l1_sphere<R: Rng + ?Sized>(v: &mut [f64], radius: f64, rng: &mut R) {
    // Exponential magnitudes normalised to the simplex are uniform on it;
    // random signs then spread the point over the whole L1 sphere.
    loop {
        v.iter_mut().for_each(|x| {
            let e: f64 = -(1.0 - rng.random::<f64>()).ln();
            *x = if rng.random::<bool>() { e } else { -e };
        });
        let n = l1_norm(v);
        if n > 1e-300 {
            v.iter_mut().for_each(|x| *x *= radius / n);
            return;
        }
    }
}

/// Output `<w^[k]_1, Psi_k>` of the network without dropout.
pub fn forward(spec: &NetworkSpec, w: &WeightAssignment, x: &[f64]) -> Result<f64> {
    w.check_shape(spec)?;
    if x.len() != spec.input_dim {
        return Err(Error::shape("input x", spec.input_dim, x.len()));
    }
    Ok(Propagator::new(spec).forward(spec, w, x, None))
}

/// Euclidean projection of every weight vector onto its ball: L2 for
/// layer 0, L1 for the rest.
pub fn project_weights(w: &WeightAssignment, spec: &NetworkSpec) -> Result<WeightAssignment> {
    let mut out = w.clone();
    project_weights_in_place(&mut out, spec)?;
    Ok(out)
}

pub fn project_weights_in_place(w: &mut WeightAssignment, spec: &NetworkSpec) -> Result<()> {
    w.check_shape(spec)?;
    for j in 0..=spec.depth() {
        let radius = spec.budgets[j];
        for u in 0..w.layout.layer(j).count {
            let v = w.vector_mut(j, u);
            match spec.layer_norm(j) {
                Norm::L2 => project_l2_ball(v, radius),
                Norm::L1 => project_l1_ball(v, radius),
            }
        }
    }
    Ok(())
}

pub fn activation_eval(info: &ActivationInfo, t: f64) -> f64 {
    info.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn one_hidden(act: Activation, w0: Vec<f64>, w1: f64) -> (NetworkSpec, WeightAssignment) {
        let spec = NetworkSpec::new(2, vec![1], vec![10.0, 10.0], act, 10.0).unwrap();
        let w = WeightAssignment::from_layers(&spec, vec![vec![w0], vec![vec![w1]]]).unwrap();
        (spec, w)
    }

    #[test]
    fn forward_linear() {
        let spec = NetworkSpec::linear(2, 5.0, 5.0).unwrap();
        let w = WeightAssignment::from_layers(&spec, vec![vec![vec![1.0, -1.0]]]).unwrap();
        assert_eq!(forward(&spec, &w, &[2.0, 3.0]).unwrap(), -1.0);
    }

    #[test]
    fn forward_one_hidden_identity() {
        let (spec, w) = one_hidden(Activation::Identity, vec![1.0, 0.0], 2.0);
        assert_eq!(forward(&spec, &w, &[3.0, 5.0]).unwrap(), 6.0);
    }

    #[test]
    fn forward_one_hidden_relu() {
        let (spec, w) = one_hidden(Activation::Relu, vec![-1.0, 0.0], 2.0);
        assert_eq!(forward(&spec, &w, &[3.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let spec = NetworkSpec::linear(2, 5.0, 5.0).unwrap();
        let w = WeightAssignment::zeros(&spec);
        let err = forward(&spec, &w, &[1.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::ShapeMismatch {
                expected: 2,
                actual: 1,
                ..
            }
        ));
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let spec = NetworkSpec::new(3, vec![2], vec![1.0, 1.0], Activation::Tanh, 1.0).unwrap();
        let err = WeightAssignment::from_layers(
            &spec,
            vec![vec![vec![0.0; 3], vec![0.0; 2]], vec![vec![0.0; 2]]],
        )
        .unwrap_err();
        match err {
            Error::ShapeMismatch {
                context,
                expected,
                actual,
            } => {
                assert!(context.contains("layer 0"), "{context}");
                assert_eq!((expected, actual), (3, 2));
            }
            e => panic!("unexpected {e:?}"),
        }
        let other = NetworkSpec::new(3, vec![3], vec![1.0, 1.0], Activation::Tanh, 1.0).unwrap();
        assert!(WeightAssignment::zeros(&other).check_shape(&spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(0, vec![], vec![1.0], Activation::Tanh, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![0], vec![1.0, 1.0], Activation::Tanh, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![2], vec![1.0], Activation::Tanh, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![2], vec![1.0, -1.0], Activation::Tanh, 1.0).is_err());
        assert!(NetworkSpec::new(2, vec![2], vec![1.0, 1.0], Activation::Tanh, 0.0).is_err());
    }

    #[test]
    fn with_depth_repeats_last_entries() {
        let t = NetworkSpec::new(4, vec![3], vec![1.0, 2.0], Activation::Tanh, 1.0).unwrap();
        let d = t.with_depth(3).unwrap();
        assert_eq!(d.widths, vec![3, 3, 3]);
        assert_eq!(d.budgets, vec![1.0, 2.0, 2.0, 2.0]);
        let z = t.with_depth(0).unwrap();
        assert!(z.widths.is_empty());
        assert_eq!(z.budgets, vec![1.0]);
    }

    #[test]
    fn activation_examples() {
        assert_eq!(Activation::Relu.eval(-2.0), 0.0);
        assert_eq!(Activation::Tanh.eval(0.0), 0.0);
        assert_eq!(Activation::CenteredSigmoid.eval(0.0), 0.0);
        for a in Activation::ALL {
            assert_eq!(a.info().value_at_zero, 0.0);
            assert_eq!(activation_eval(&a.info(), 0.0), 0.0);
        }
        // matches the textbook sigmoid minus one half
        for t in [-3.0, -0.5, 0.7, 4.0f64] {
            let s = 1.0 / (1.0 + (-t).exp()) - 0.5;
            assert!((Activation::CenteredSigmoid.eval(t) - s).abs() < 1e-15);
        }
    }

    #[test]
    fn activations_are_lipschitz_and_monotone_on_grid() {
        let grid: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.0025).collect();
        for a in Activation::ALL {
            let l = a.lipschitz();
            for p in grid.windows(2) {
                let (x, y) = (a.eval(p[0]), a.eval(p[1]));
                assert!(y >= x, "{a} not monotone at {}", p[0]);
                assert!((y - x).abs() <= l * (p[1] - p[0]) * (1.0 + 1e-12), "{a} at {}", p[0]);
            }
            let mut rng = stream_rng(3, &[]);
            for _ in 0..1000 {
                let (s, t): (f64, f64) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
                assert!((a.eval(s) - a.eval(t)).abs() <= l * (s - t).abs() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn identity_single_unit_is_inner_product() {
        let spec = NetworkSpec::new(3, vec![1], vec![10.0, 1.0], Activation::Identity, 1.0).unwrap();
        let v = vec![0.5, -1.25, 2.0];
        let w = WeightAssignment::from_layers(&spec, vec![vec![v.clone()], vec![vec![1.0]]]).unwrap();
        let x = [1.5, 0.25, -0.75];
        let direct: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert_eq!(forward(&spec, &w, &x).unwrap(), direct);
    }

    #[test]
    fn projection_examples() {
        let spec = NetworkSpec::new(2, vec![1], vec![5.0, 1.0], Activation::Identity, 1.0).unwrap();
        let w = WeightAssignment::from_layers(&spec, vec![vec![vec![6.0, 8.0]], vec![vec![2.0]]]).unwrap();
        let p = project_weights(&w, &spec).unwrap();
        assert_eq!(p.vector(0, 0), &[3.0, 4.0]);
        assert_eq!(p.vector(1, 0), &[1.0]);

        let spec2 = NetworkSpec::new(2, vec![2], vec![5.0, 1.0], Activation::Identity, 1.0).unwrap();
        let w2 = WeightAssignment::from_layers(
            &spec2,
            vec![vec![vec![3.0, 4.0], vec![0.0, 1.0]], vec![vec![2.0, 0.0]]],
        )
        .unwrap();
        let p2 = project_weights(&w2, &spec2).unwrap();
        assert_eq!(p2.vector(0, 0), &[3.0, 4.0]);
        assert_eq!(p2.vector(1, 0), &[1.0, 0.0]);
    }

    #[test]
    fn boundary_samples_sit_on_the_boundary() {
        let spec = NetworkSpec::new(5, vec![4, 3], vec![2.0, 1.5, 0.5], Activation::Tanh, 1.0).unwrap();
        let mut rng = stream_rng(11, &[]);
        let w = WeightAssignment::random_on_boundary(&spec, &mut rng);
        for j in 0..=2 {
            for u in 0..w.layout().layer(j).count {
                let v = w.vector(j, u);
                let n = if j == 0 { l2_norm(v) } else { l1_norm(v) };
                assert!((n - spec.budgets[j]).abs() < 1e-12);
            }
        }
    }

    fn arb_spec() -> impl Strategy<Value = NetworkSpec> {
        (
            1usize..6,
            proptest::collection::vec(1usize..5, 0..4),
            0usize..4,
            0.2f64..3.0,
            0.2f64..3.0,
            0.2f64..3.0,
        )
            .prop_map(|(d, widths, a, b0, bh, xb)| {
                let k = widths.len();
                let mut budgets = vec![b0];
                budgets.extend(std::iter::repeat_n(bh, k));
                NetworkSpec::new(d, widths, budgets, Activation::ALL[a], xb).unwrap()
            })
    }

    proptest! {
        #[test]
        fn output_never_exceeds_norm_chain(spec in arb_spec(), seed in 0u64..10_000) {
            let mut rng = stream_rng(seed, &[]);
            let w = WeightAssignment::random_feasible(&spec, &mut rng);
            let mut x = vec![0.0; spec.input_dim];
            sample_l2_sphere(&mut x, spec.input_bound * rng.random::<f64>(), &mut rng);
            let bound = spec.lipschitz().powi(spec.depth() as i32)
                * spec.input_bound
                * spec.budgets.iter().product::<f64>();
            let y = forward(&spec, &w, &x).unwrap();
            prop_assert!(y.abs() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn projection_is_idempotent(spec in arb_spec(), seed in 0u64..10_000) {
            let mut rng = stream_rng(seed, &[]);
            let raw: Vec<f64> = (0..spec.layout().total()).map(|_| rng.random_range(-4.0..4.0)).collect();
            let w = WeightAssignment::from_flat(&spec, raw).unwrap();
            let p = project_weights(&w, &spec).unwrap();
            prop_assert!(p.is_feasible(&spec, 1e-12));
            let pp = project_weights(&p, &spec).unwrap();
            for (a, b) in p.as_slice().iter().zip(pp.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_contracts_each_vector(spec in arb_spec(), seed in 0u64..10_000) {
            let mut rng = stream_rng(seed, &[]);
            let n = spec.layout().total();
            let a = WeightAssignment::from_flat(&spec, (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap();
            let b = WeightAssignment::from_flat(&spec, (0..n).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap();
            let (pa, pb) = (project_weights(&a, &spec).unwrap(), project_weights(&b, &spec).unwrap());
            for j in 0..=spec.depth() {
                for u in 0..a.layout().layer(j).count {
                    let before: Vec<f64> = a.vector(j, u).iter().zip(b.vector(j, u)).map(|(x, y)| x - y).collect();
                    let after: Vec<f64> = pa.vector(j, u).iter().zip(pb.vector(j, u)).map(|(x, y)| x - y).collect();
                    prop_assert!(l2_norm(&after) <= l2_norm(&before) + 1e-12);
                }
            }
        }
    }
}
