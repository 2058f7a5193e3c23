//! Dropout Rademacher complexity of fully connected feedforward networks.
//!
//! The crate provides the three dropout regimes (units, weights, both),
//! estimators for the empirical and expected generalized Rademacher
//! complexity, closed-form complexity and generalization bounds, exact
//! and Monte Carlo checks of the mask moment identities, and a harness
//! for seeded experiment sweeps.

pub mod bounds;
pub mod data;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod masks;
pub mod moments;
pub mod net;
pub mod projection;
mod propagate;
pub mod rng;

pub use bounds::{
    generalization_bound, loss_bound, loss_lipschitz, output_bound, theoretical_complexity_bound,
    BoundReport, BoundVariant, LossKind, LossSpec,
};
pub use data::{DataDistribution, DistributionKind, InputSampler};
pub use error::{Error, Result};
pub use estimator::{
    closed_form_linear_sup, estimate_empirical_rademacher, estimate_expected_rademacher,
    ComplexityEstimate, EstimatorConfig, InnerObjective,
};
pub use masks::{forward_dropout, sample_masks, tie_masks, DropoutType, MaskBundle, SamplerConfig};
pub use moments::{moment_analytic, moment_enumerated, moment_monte_carlo, MomentIdentity, MomentQuery};
pub use net::{
    activation_eval, forward, project_weights, Activation, ActivationInfo, NetworkSpec,
    WeightAssignment,
};
