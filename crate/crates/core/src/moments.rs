//! Second-moment identities of Bernoulli masks:
//! `E ||x ⊙ r_1 ⊙ .. (Π r_i)||^2 = rho^p ||x||^2`, where `p` counts the
//! independent Bernoulli factors multiplying each coordinate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::validate_rho;
use crate::rng::stream_rng;

/// Which mask structure is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentIdentity {
    /// One vector mask `r_1`; `p = 1`.
    UnitMask,
    /// Two vector masks `r_1 ⊙ r_2`; `p = 2`.
    DoubleMask,
    /// `r_1` times `k` scalar masks; `p = k + 1`.
    UnitMaskScalars { k: usize },
    /// `r_1 ⊙ r_2` times `k` scalar masks; `p = k + 2`.
    DoubleMaskScalars { k: usize },
}

impl MomentIdentity {
    pub fn power(self) -> usize {
        match self {
            MomentIdentity::UnitMask => 1,
            MomentIdentity::DoubleMask => 2,
            MomentIdentity::UnitMaskScalars { k } => k + 1,
            MomentIdentity::DoubleMaskScalars { k } => k + 2,
        }
    }

    fn vector_masks(self) -> usize {
        match self {
            MomentIdentity::UnitMask | MomentIdentity::UnitMaskScalars { .. } => 1,
            MomentIdentity::DoubleMask | MomentIdentity::DoubleMaskScalars { .. } => 2,
        }
    }

    fn scalar_masks(self) -> usize {
        match self {
            MomentIdentity::UnitMaskScalars { k } | MomentIdentity::DoubleMaskScalars { k } => k,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuery {
    pub x: Vec<f64>,
    pub identity: MomentIdentity,
    pub rho: f64,
}

impl MomentQuery {
    /// Query with `p` factors: one vector mask for `p = 1`, two for
    /// `p = 2`, one vector mask and `p - 1` scalars beyond that.
    pub fn new(x: Vec<f64>, p: usize, rho: f64) -> Result<Self> {
        let identity = match p {
            0 => return Err(Error::invalid("power", "p must be at least 1")),
            1 => MomentIdentity::UnitMask,
            2 => MomentIdentity::DoubleMask,
            p => MomentIdentity::UnitMaskScalars { k: p - 1 },
        };
        Self::with_identity(x, identity, rho)
    }

    pub fn with_identity(x: Vec<f64>, identity: MomentIdentity, rho: f64) -> Result<Self> {
        validate_rho(rho)?;
        Ok(MomentQuery { x, identity, rho })
    }

    pub fn power(&self) -> usize {
        self.identity.power()
    }

    fn mask_bits(&self) -> usize {
        self.identity.vector_masks() * self.x.len() + self.identity.scalar_masks()
    }

    /// `||x ⊙ masks||^2` for one draw; `bits` lists the vector masks
    /// coordinate-major then the scalars.
    fn masked_square(&self, bits: impl Fn(usize) -> bool) -> f64 {
        let d = self.x.len();
        let vectors = self.identity.vector_masks();
        let scalar = (0..self.identity.scalar_masks())
            .map(|i| f64::from(u8::from(bits(vectors * d + i))))
            .product::<f64>();
        self.x
            .iter()
            .enumerate()
            .map(|(j, &xj)| {
                let mut v = xj * f64::from(u8::from(bits(j)));
                if vectors == 2 {
                    v *= f64::from(u8::from(bits(d + j)));
                }
                v *= scalar;
                v * v
            })
            .sum()
    }
}

/// `rho^p · ||x||^2`.
pub fn moment_analytic(q: &MomentQuery) -> f64 {
    let norm_sq: f64 = q.x.iter().map(|v| v * v).sum();
    q.rho.powi(q.power() as i32) * norm_sq
}

/// Largest mask-bit count the enumeration accepts.
pub const MAX_ENUMERATION_BITS: usize = 24;

/// Exact expectation by summing over every mask configuration weighted
/// by its probability.
pub fn moment_enumerated(q: &MomentQuery) -> Result<f64> {
    let bits = q.mask_bits();
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::invalid(
            "moment query",
            format!("{bits} mask bits exceed the enumeration limit {MAX_ENUMERATION_BITS}"),
        ));
    }
    let mut total = 0.0;
    for config in 0u64..(1u64 << bits) {
        let ones = config.count_ones() as i32;
        let prob = q.rho.powi(ones) * (1.0 - q.rho).powi(bits as i32 - ones);
        if prob == 0.0 {
            continue;
        }
        total += prob * q.masked_square(|b| (config >> b) & 1 == 1);
    }
    Ok(total)
}

/// Sample mean and standard error of the masked squared norm over
/// `trials` draws of the exact mask structure.
pub fn moment_monte_carlo(q: &MomentQuery, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut rng = stream_rng(seed, &[]);
    let bits = q.mask_bits();
    let mut draw = vec![false; bits];
    // Welford keeps the mean exact for constant samples
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..trials {
        draw.iter_mut().for_each(|b| *b = rng.random::<f64>() < q.rho);
        let v = q.masked_square(|b| draw[b]);
        let delta = v - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (v - mean);
    }
    let se = if trials > 1 {
        (m2 / (trials - 1) as f64 / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, se))
}
