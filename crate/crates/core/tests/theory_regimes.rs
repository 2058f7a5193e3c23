//! With one unit per hidden layer the top-unit reduction in the
//! complexity argument loses nothing, so the theoretical bound must
//! dominate the estimates there.

use droprad::harness::{run_sweep, SweepConfig};
use droprad::{Activation, DistributionKind, DropoutType, EstimatorConfig, NetworkSpec};

#[test]
fn single_unit_chains_respect_the_bound() {
    let cfg = SweepConfig {
        template: NetworkSpec::new(8, vec![1], vec![1.0, 1.0], Activation::Tanh, 1.0).unwrap(),
        types: DropoutType::ALL.to_vec(),
        rho_grid: vec![0.1, 0.25, 0.5, 1.0],
        n_grid: vec![32],
        k_grid: vec![1, 2],
        estimator: EstimatorConfig {
            n_epsilon_draws: 4,
            n_restarts: 3,
            ascent_steps: 150,
            n_outer_replicates: 6,
            ..EstimatorConfig::default()
        },
        distribution: DistributionKind::UnitSphere,
        seed: 17,
        output: None,
    };
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 24);
    for r in &rows {
        assert!(r.error.is_none(), "{:?}", r.error);
        assert!(
            r.dominance,
            "{} k={} rho={}: estimate {:?} se {:?} bound {}",
            r.kind, r.k, r.rho, r.estimate, r.std_error, r.bound
        );
    }
}
