//! Input distributions for the expected-complexity estimator and the
//! synthetic experiments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::projection::{l2_norm, project_l2_ball};

/// Draws one input vector per call.
pub trait InputSampler: Sync {
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn sample_inputs(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample_input(rng)).collect()
    }
}

impl<F> InputSampler for F
where
    F: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    /// Uniform on the sphere of radius `bound`.
    #[default]
    UnitSphere,
    /// `N(0, bound^2/d · I)` projected onto the ball of radius `bound`.
    ScaledGaussianProjected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataDistribution {
    pub kind: DistributionKind,
    pub dim: usize,
    pub bound: f64,
}

impl DataDistribution {
    pub fn new(kind: DistributionKind, dim: usize, bound: f64) -> Self {
        DataDistribution { kind, dim, bound }
    }
}

impl InputSampler for DataDistribution {
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.kind {
            DistributionKind::UnitSphere => loop {
                let mut v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = l2_norm(&v);
                if n > 1e-300 {
                    v.iter_mut().for_each(|x| *x *= self.bound / n);
                    return v;
                }
            },
            DistributionKind::ScaledGaussianProjected => {
                let sd = self.bound / (self.dim as f64).sqrt();
                let mut v: Vec<f64> = (0..self.dim)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                project_l2_ball(&mut v, self.bound);
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn sphere_samples_have_exact_norm() {
        let d = DataDistribution::new(DistributionKind::UnitSphere, 7, 2.5);
        let mut rng = stream_rng(1, &[]);
        for x in d.sample_inputs(100, &mut rng) {
            assert_eq!(x.len(), 7);
            assert!((l2_norm(&x) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_samples_stay_in_ball() {
        let d = DataDistribution::new(DistributionKind::ScaledGaussianProjected, 3, 1.0);
        let mut rng = stream_rng(2, &[]);
        let xs = d.sample_inputs(2000, &mut rng);
        assert!(xs.iter().all(|x| l2_norm(x) <= 1.0 + 1e-12));
        assert!(xs.iter().any(|x| l2_norm(x) < 0.9));
    }
}
