//! Seeded sweeps over `(type, k, rho, n)` with CSV and JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::theoretical_complexity_bound;
use crate::data::{DataDistribution, DistributionKind};
use crate::error::{Error, Result};
use crate::estimator::{estimate_expected_rademacher, EstimatorConfig};
use crate::masks::{validate_rho, DropoutType};
use crate::net::NetworkSpec;
use crate::rng::derive_seed;

pub const CSV_HEADER: &str =
    "type,k,rho,n,d,widths,budgets,Bhat,estimate,std_error,bound,dominance,seconds,seed,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub template: NetworkSpec,
    pub types: Vec<DropoutType>,
    pub rho_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub estimator: EstimatorConfig,
    pub distribution: DistributionKind,
    pub seed: u64,
    /// CSV destination; the JSON summary goes next to it.
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        self.estimator.validate()?;
        let grids = [
            ("types", self.types.is_empty()),
            ("rho", self.rho_grid.is_empty()),
            ("n", self.n_grid.is_empty()),
            ("k", self.k_grid.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|g| g.1) {
            return Err(Error::invalid(name, "grid must not be empty"));
        }
        for &rho in &self.rho_grid {
            validate_rho(rho)?;
            if rho == 0.0 {
                return Err(Error::invalid("rho", "sweep keep probabilities must be positive"));
            }
        }
        if self.n_grid.contains(&0) {
            return Err(Error::invalid("n", "sample sizes must be at least 1"));
        }
        for &k in &self.k_grid {
            self.template.with_depth(k)?;
        }
        Ok(())
    }

    /// Grid points in output order: type, then k, then rho, then n.
    fn points(&self) -> Vec<(usize, DropoutType, usize, f64, usize)> {
        let mut out = Vec::new();
        for (ti, &kind) in self.types.iter().enumerate() {
            for &k in &self.k_grid {
                for &rho in &self.rho_grid {
                    for &n in &self.n_grid {
                        out.push((ti, kind, k, rho, n));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: DropoutType,
    pub k: usize,
    pub rho: f64,
    pub n: usize,
    pub d: usize,
    pub widths: Vec<usize>,
    pub budgets: Vec<f64>,
    pub input_bound: f64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub bound: f64,
    pub dominance: bool,
    pub seconds: f64,
    pub seed: u64,
    pub error: Option<String>,
}

impl SweepRow {
    fn csv_line(&self, out: &mut String) {
        let join_f = |v: &[f64]| v.iter().map(|b| fmt_f(*b)).collect::<Vec<_>>().join(";");
        let join_u = |v: &[usize]| v.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
        let opt = |v: Option<f64>| v.map(fmt_f).unwrap_or_default();
        let error = self
            .error
            .as_deref()
            .map(|e| e.replace([',', '\n', '\r'], " "))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.k,
            fmt_f(self.rho),
            self.n,
            self.d,
            join_u(&self.widths),
            join_f(&self.budgets),
            fmt_f(self.input_bound),
            opt(self.estimate),
            opt(self.std_error),
            fmt_f(self.bound),
            self.dominance,
            fmt_f(self.seconds),
            self.seed,
            error
        );
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn run_point(cfg: &SweepConfig, ti: usize, kind: DropoutType, k: usize, rho: f64, n: usize) -> SweepRow {
    let seed = derive_seed(cfg.seed, &[ti as u64, k as u64, rho.to_bits(), n as u64]);
    // validated up front, so this cannot fail
    let spec = cfg.template.with_depth(k).expect("validated depth");
    let bound = theoretical_complexity_bound(&spec, kind, rho, n).expect("validated grid");
    let sampler = DataDistribution::new(cfg.distribution, spec.input_dim, spec.input_bound);
    let est_cfg = EstimatorConfig {
        rng_seed: seed,
        ..cfg.estimator.clone()
    };
    let start = Instant::now();
    let result = estimate_expected_rademacher(&spec, kind, &sampler, rho, n, &est_cfg);
    let seconds = start.elapsed().as_secs_f64();
    let (estimate, std_error, error) = match result {
        Ok(e) => (Some(e.point), Some(e.std_error), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    SweepRow {
        kind,
        k,
        rho,
        n,
        d: spec.input_dim,
        widths: spec.widths.clone(),
        budgets: spec.budgets.clone(),
        input_bound: spec.input_bound,
        estimate,
        std_error,
        bound,
        dominance: matches!((estimate, std_error), (Some(e), Some(s)) if e <= bound + 3.0 * s),
        seconds,
        seed,
        error,
    }
}

/// Runs every grid point; estimator failures are kept in the row's
/// `error` field. Rows come back in grid order whatever the pool size.
/// When `cfg.output` is set the CSV and a JSON summary are written.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if let Some(path) = &cfg.output {
        // fail before spending compute on an unwritable destination
        std::fs::File::create(path)?;
    }
    let rows: Vec<SweepRow> = cfg
        .points()
        .into_par_iter()
        .map(|(ti, kind, k, rho, n)| run_point(cfg, ti, kind, k, rho, n))
        .collect();
    if let Some(path) = &cfg.output {
        write_csv(&rows, path)?;
        let summary = summary(cfg, &rows)?;
        std::fs::write(path.with_extension("json"), summary)?;
    }
    Ok(rows)
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        row.csv_line(&mut out);
    }
    out
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows))?;
    Ok(())
}

/// Run id: leading hex of the SHA-256 of the config echo.
pub fn run_id(cfg: &SweepConfig) -> Result<String> {
    let echo = serde_json::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(echo.as_bytes());
    Ok(hex::encode(&digest[..6]))
}

fn summary(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<String> {
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let dominant = rows.iter().filter(|r| r.dominance).count();
    let value = serde_json::json!({
        "run_id": run_id(cfg)?,
        "config": cfg,
        "rows": rows.len(),
        "dominant_rows": dominant,
        "failed_rows": failed,
    });
    serde_json::to_string_pretty(&value).map_err(|e| Error::Config(e.to_string()))
}
