//! TOML experiment files with `[network]`, `[estimator]`, `[sweep]` and
//! `[train]` sections. Unknown keys are rejected.
//!
//! ```toml
//! [network]
//! input_dim = 8
//! widths = [3]
//! budgets = [1.0, 1.0]
//! activation = "tanh"
//! input_bound = 1.0
//!
//! [estimator]
//! n_epsilon_draws = 8
//!
//! [sweep]
//! types = ["I", "II", "III"]
//! rho = [0.25, 0.5, 1.0]
//! n = [32]
//! k = [0, 1]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DistributionKind;
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::harness::sweep::SweepConfig;
use crate::harness::train::TrainConfig;
use crate::masks::DropoutType;
use crate::net::NetworkSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub sweep: Option<SweepSection>,
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "all_types")]
    pub types: Vec<DropoutType>,
    pub rho: Vec<f64>,
    pub n: Vec<usize>,
    /// Hidden-layer counts; widths and budgets are re-derived from the
    /// network template. Defaults to the template's own depth.
    #[serde(default)]
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub distribution: DistributionKind,
    #[serde(default)]
    pub seed: u64,
}

fn all_types() -> Vec<DropoutType> {
    DropoutType::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.network.validate()?;
        cfg.estimator.validate()?;
        if let Some(t) = &cfg.train {
            t.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sweep configuration from the `[sweep]` section.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let cfg = SweepConfig {
            template: self.network.clone(),
            types: s.types.clone(),
            rho_grid: s.rho.clone(),
            n_grid: s.n.clone(),
            k_grid: s.k.clone().unwrap_or_else(|| vec![self.network.depth()]),
            estimator: self.estimator.clone(),
            distribution: s.distribution,
            seed: s.seed,
            output: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[network]
input_dim = 8
widths = [3]
budgets = [1.0, 1.0]
activation = "tanh"
input_bound = 1.0

[estimator]
n_epsilon_draws = 8
n_restarts = 2

[sweep]
types = ["I", "III"]
rho = [0.25, 0.5, 1.0]
n = [32]
k = [0, 1]
seed = 5
"#;

    #[test]
    fn parses_example() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.network.widths, vec![3]);
        assert_eq!(cfg.estimator.n_epsilon_draws, 8);
        assert_eq!(cfg.estimator.ascent_steps, EstimatorConfig::default().ascent_steps);
        let sweep = cfg.sweep_config().unwrap();
        assert_eq!(sweep.types, vec![DropoutType::I, DropoutType::III]);
        assert_eq!(sweep.k_grid, vec![0, 1]);
        assert_eq!(sweep.seed, 5);
    }

    #[test]
    fn round_trips() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_fail() {
        let bad = EXAMPLE.replace("input_bound = 1.0", "input_bound = 1.0\nbias = true");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = format!("{EXAMPLE}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = EXAMPLE.replace("n_restarts = 2", "n_restart = 2");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn invalid_values_fail() {
        let bad = EXAMPLE.replace("budgets = [1.0, 1.0]", "budgets = [1.0]");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = EXAMPLE.replace("rho = [0.25, 0.5, 1.0]", "rho = []");
        let cfg = ExperimentConfig::from_toml_str(&bad).unwrap();
        assert!(cfg.sweep_config().is_err());
    }
}
