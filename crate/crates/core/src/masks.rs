//! Dropout masks and the three dropout forward passes.
//!
//! * Type I drops units: layer `j` sees `Psi_j ⊙ r^[j]` for `j = 0..=k`.
//! * Type II drops weights: every weight vector gets its own mask.
//! * Type III does both; the unit mask of a layer is shared by all the
//!   weight vectors reading from it, the weight masks are per vector.
//!
//! Masks never rescale survivors and the output node itself is never
//! dropped.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Layout, NetworkSpec, WeightAssignment};
use crate::propagate::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropoutType {
    I,
    II,
    III,
}

impl DropoutType {
    pub const ALL: [DropoutType; 3] = [DropoutType::I, DropoutType::II, DropoutType::III];

    pub fn has_unit_masks(self) -> bool {
        matches!(self, DropoutType::I | DropoutType::III)
    }

    pub fn has_weight_masks(self) -> bool {
        matches!(self, DropoutType::II | DropoutType::III)
    }

    pub fn name(self) -> &'static str {
        match self {
            DropoutType::I => "I",
            DropoutType::II => "II",
            DropoutType::III => "III",
        }
    }
}

impl fmt::Display for DropoutType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DropoutType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" | "i" => Ok(DropoutType::I),
            "II" | "2" | "ii" => Ok(DropoutType::II),
            "III" | "3" | "iii" => Ok(DropoutType::III),
            _ => Err(Error::invalid("dropout type", format!("unknown type `{s}`"))),
        }
    }
}

/// Bernoulli(`keep_probability`) mask sampling, keyed by `(rng_seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub keep_probability: f64,
    pub rng_seed: u64,
    pub stream_id: u64,
}

impl SamplerConfig {
    pub fn new(keep_probability: f64, rng_seed: u64, stream_id: u64) -> Result<Self> {
        validate_rho(keep_probability)?;
        Ok(SamplerConfig {
            keep_probability,
            rng_seed,
            stream_id,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

pub(crate) fn validate_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid(
            "keep probability",
            format!("{rho} is outside [0, 1]"),
        ))
    }
}

/// Unit masks, one 0/1 vector per `Psi_j`, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
struct UnitMasks {
    offsets: Vec<usize>,
    data: Vec<u8>,
}

impl UnitMasks {
    fn filled(spec: &NetworkSpec, value: u8) -> Self {
        let mut offsets = Vec::with_capacity(spec.depth() + 2);
        let mut total = 0;
        for j in 0..=spec.depth() {
            offsets.push(total);
            total += spec.layer_input_len(j);
        }
        offsets.push(total);
        UnitMasks {
            offsets,
            data: vec![value; total],
        }
    }

    fn layer(&self, j: usize) -> &[u8] {
        &self.data[self.offsets[j]..self.offsets[j + 1]]
    }

    fn layer_mut(&mut self, j: usize) -> &mut [u8] {
        &mut self.data[self.offsets[j]..self.offsets[j + 1]]
    }

    fn layers(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// The full collection of 0/1 masks applied in one dropout forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskBundle {
    kind: DropoutType,
    layout: Layout,
    unit: Option<UnitMasks>,
    weight: Option<Vec<u8>>,
}

impl MaskBundle {
    fn filled(spec: &NetworkSpec, kind: DropoutType, value: u8) -> Self {
        let layout = spec.layout();
        let weight = kind
            .has_weight_masks()
            .then(|| vec![value; layout.total()]);
        MaskBundle {
            kind,
            unit: kind.has_unit_masks().then(|| UnitMasks::filled(spec, value)),
            weight,
            layout,
        }
    }

    pub fn ones(spec: &NetworkSpec, kind: DropoutType) -> Self {
        Self::filled(spec, kind, 1)
    }

    pub fn zeros(spec: &NetworkSpec, kind: DropoutType) -> Self {
        Self::filled(spec, kind, 0)
    }

    /// Builds a bundle from explicit vectors. `unit[j]` masks `Psi_j`;
    /// `weight[j][u]` masks weight vector `u` of layer `j`.
    pub fn from_parts(
        spec: &NetworkSpec,
        kind: DropoutType,
        unit: Option<Vec<Vec<u8>>>,
        weight: Option<Vec<Vec<Vec<u8>>>>,
    ) -> Result<Self> {
        let mut bundle = Self::zeros(spec, kind);
        match (kind.has_unit_masks(), unit) {
            (true, Some(unit)) => {
                let masks = bundle.unit.as_mut().unwrap();
                if unit.len() != masks.layers() {
                    return Err(Error::shape("unit masks: layer count", masks.layers(), unit.len()));
                }
                for (j, v) in unit.iter().enumerate() {
                    let dst = masks.layer_mut(j);
                    if v.len() != dst.len() {
                        return Err(Error::shape(format!("unit mask r^[{j}] length"), dst.len(), v.len()));
                    }
                    check_binary(v, "unit mask")?;
                    dst.copy_from_slice(v);
                }
            }
            (false, None) => {}
            (true, None) => return Err(Error::invalid("masks", format!("type {kind} needs unit masks"))),
            (false, Some(_)) => {
                return Err(Error::invalid("masks", format!("type {kind} takes no unit masks")))
            }
        }
        match (kind.has_weight_masks(), weight) {
            (true, Some(weight)) => {
                let w = WeightAssignment::from_layers(
                    spec,
                    weight
                        .iter()
                        .map(|l| l.iter().map(|v| v.iter().map(|&b| f64::from(b)).collect()).collect())
                        .collect(),
                )
                .map_err(|e| match e {
                    Error::ShapeMismatch { context, expected, actual } => Error::ShapeMismatch {
                        context: context.replacen("weights", "weight masks", 1),
                        expected,
                        actual,
                    },
                    e => e,
                })?;
                let flat: Vec<u8> = w.as_slice().iter().map(|&x| x as u8).collect();
                check_binary(&flat, "weight mask")?;
                bundle.weight = Some(flat);
            }
            (false, None) => {}
            (true, None) => {
                return Err(Error::invalid("masks", format!("type {kind} needs weight masks")))
            }
            (false, Some(_)) => {
                return Err(Error::invalid("masks", format!("type {kind} takes no weight masks")))
            }
        }
        Ok(bundle)
    }

    pub fn dropout_type(&self) -> DropoutType {
        self.kind
    }

    /// Mask on `Psi_j`, present for types I and III.
    #[inline]
    pub fn unit_mask(&self, layer: usize) -> Option<&[u8]> {
        self.unit.as_ref().map(|u| u.layer(layer))
    }

    /// Mask on weight vector `unit` of layer `layer`, present for types II and III.
    #[inline]
    pub fn weight_mask(&self, layer: usize, unit: usize) -> Option<&[u8]> {
        self.weight
            .as_ref()
            .map(|w| &w[self.layout.range(layer, unit)])
    }

    pub fn check_shape(&self, spec: &NetworkSpec) -> Result<()> {
        self.layout.check_against(spec, "masks")
    }

    /// All entries, unit masks first.
    pub fn entries(&self) -> impl Iterator<Item = u8> + '_ {
        let unit = self.unit.iter().flat_map(|u| u.data.iter().copied());
        let weight = self.weight.iter().flat_map(|w| w.iter().copied());
        unit.chain(weight)
    }

    /// One line per mask vector, entries separated by spaces: unit masks
    /// `r^[0]..r^[k]` first, then weight masks layer by layer.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut push = |v: &[u8]| {
            let line: Vec<String> = v.iter().map(|b| b.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        };
        if let Some(u) = &self.unit {
            (0..u.layers()).for_each(|j| push(u.layer(j)));
        }
        if self.weight.is_some() {
            for (j, s) in self.layout.layers().iter().enumerate() {
                for unit in 0..s.count {
                    push(self.weight_mask(j, unit).unwrap());
                }
            }
        }
        out
    }

    /// Inverse of [`MaskBundle::dump`].
    pub fn parse_dump(spec: &NetworkSpec, kind: DropoutType, text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|line| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<u8>()
                        .map_err(|_| Error::invalid("mask dump", format!("bad entry `{t}`")))
                })
                .collect::<Result<Vec<u8>>>()
        });
        let mut next = |what: &str| {
            lines
                .next()
                .unwrap_or_else(|| Err(Error::invalid("mask dump", format!("missing {what}"))))
        };
        let unit = if kind.has_unit_masks() {
            Some((0..=spec.depth()).map(|_| next("unit mask")).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let weight = if kind.has_weight_masks() {
            let layout = spec.layout();
            let mut layers = Vec::new();
            for s in layout.layers() {
                layers.push((0..s.count).map(|_| next("weight mask")).collect::<Result<Vec<_>>>()?);
            }
            Some(layers)
        } else {
            None
        };
        Self::from_parts(spec, kind, unit, weight)
    }
}

fn check_binary(v: &[u8], what: &'static str) -> Result<()> {
    match v.iter().find(|&&b| b > 1) {
        Some(b) => Err(Error::invalid(what, format!("entry {b} is not 0 or 1"))),
        None => Ok(()),
    }
}

/// Draws a bundle whose entries are independently 1 with probability
/// `cfg.keep_probability`. Deterministic in `(rng_seed, stream_id)`.
pub fn sample_masks(spec: &NetworkSpec, kind: DropoutType, cfg: &SamplerConfig) -> Result<MaskBundle> {
    validate_rho(cfg.keep_probability)?;
    let mut rng = cfg.rng();
    Ok(sample_masks_with(spec, kind, cfg.keep_probability, &mut rng))
}

pub(crate) fn sample_masks_with<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    kind: DropoutType,
    rho: f64,
    rng: &mut R,
) -> MaskBundle {
    let mut bundle = MaskBundle::zeros(spec, kind);
    let mut fill = |v: &mut [u8]| {
        v.iter_mut()
            .for_each(|b| *b = u8::from(rng.random::<f64>() < rho));
    };
    if let Some(u) = bundle.unit.as_mut() {
        fill(&mut u.data);
    }
    if let Some(w) = bundle.weight.as_mut() {
        fill(w);
    }
    bundle
}

/// Dropout output `f^(type)(w, x, r)`; the recursion is selected by the
/// bundle's type.
pub fn forward_dropout(
    spec: &NetworkSpec,
    w: &WeightAssignment,
    x: &[f64],
    masks: &MaskBundle,
) -> Result<f64> {
    w.check_shape(spec)?;
    masks.check_shape(spec)?;
    if x.len() != spec.input_dim {
        return Err(Error::shape("input x", spec.input_dim, x.len()));
    }
    Ok(Propagator::new(spec).forward(spec, w, x, Some(masks)))
}

/// Turns a Type I bundle into the Type II bundle that gives the same
/// output for every `(w, x)`: each weight vector of layer `j` receives a
/// copy of the unit mask `r^[j]`.
pub fn tie_masks(type_one: &MaskBundle, spec: &NetworkSpec) -> Result<MaskBundle> {
    if type_one.kind != DropoutType::I {
        return Err(Error::invalid(
            "masks",
            format!("tie_masks expects a type I bundle, got type {}", type_one.kind),
        ));
    }
    type_one.check_shape(spec)?;
    let mut tied = MaskBundle::zeros(spec, DropoutType::II);
    let layout = tied.layout.clone();
    let weight = tied.weight.as_mut().unwrap();
    for (j, s) in layout.layers().iter().enumerate() {
        let unit = type_one.unit_mask(j).unwrap();
        for u in 0..s.count {
            weight[layout.range(j, u)].copy_from_slice(unit);
        }
    }
    Ok(tied)
}

/// The single effective mask of a linear (`k = 0`) network: `r` for
/// types I and II, `r_1 ⊙ r_2` for type III.
pub fn effective_linear_mask(masks: &MaskBundle) -> Vec<u8> {
    match (masks.unit_mask(0), masks.weight_mask(0, 0)) {
        (Some(u), Some(w)) => u.iter().zip(w).map(|(a, b)| a * b).collect(),
        (Some(u), None) => u.to_vec(),
        (None, Some(w)) => w.to_vec(),
        (None, None) => unreachable!("every dropout type carries masks"),
    }
}
