//! Command-line front end for sweeps, moment checks, the gap experiment,
//! slope fitting and the bound calculator.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use droprad::harness::{self, sweep, ExperimentConfig};
use droprad::{
    generalization_bound, moment_analytic, moment_enumerated, moment_monte_carlo, output_bound,
    theoretical_complexity_bound, Activation, BoundVariant, DropoutType, LossSpec, MomentQuery, NetworkSpec,
};

#[derive(Parser)]
#[command(name = "droprad", version, about = "Dropout Rademacher complexity experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the `[sweep]` grid and write CSV (plus a JSON summary with --out).
    Sweep,
    /// Compare analytic, enumerated and Monte Carlo mask moments.
    Moments(MomentsArgs),
    /// Run the generalization-gap experiment from `[network]` and `[train]`.
    Gap(GapArgs),
    /// Fit a log-log slope over rho.
    Slope(SlopeArgs),
    /// Theoretical complexity and generalization bounds.
    Bound(BoundArgs),
}

#[derive(Args)]
struct MomentsArgs {
    /// Comma-separated vector x.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    x: Vec<f64>,
    /// Number of independent keep factors per coordinate.
    #[arg(long, default_value_t = 1)]
    power: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

#[derive(Args)]
struct GapArgs {
    /// Overrides `n_trials` from the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides `delta` from the config.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct SlopeArgs {
    /// Points as rho:value pairs.
    #[arg(long, value_delimiter = ',', conflicts_with = "csv")]
    points: Vec<String>,
    /// Sweep CSV to read points from.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Column to fit when reading a CSV: estimate or bound.
    #[arg(long, default_value = "estimate")]
    column: String,
    #[arg(long = "type")]
    kind: Option<DropoutType>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long = "type")]
    kind: DropoutType,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    n: usize,
    /// Per-layer budgets B_0..B_k when no config is given.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    input_bound: f64,
    #[arg(long, default_value = "tanh")]
    activation: Activation,
    /// Training risk; when given the generalization bound is reported too.
    #[arg(long)]
    risk: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Label bound for the square loss.
    #[arg(long, default_value_t = 1.0)]
    y_bound: f64,
    #[arg(long)]
    empirical: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    harness::with_jobs(jobs, || run(cli))?
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let path = path.context("this command needs --config")?;
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Sweep => {
            let cfg = load_config(cli.config.as_deref())?;
            let mut sweep_cfg = cfg.sweep_config()?;
            if let Some(seed) = cli.seed {
                sweep_cfg.seed = seed;
            }
            sweep_cfg.output = cli.out.clone();
            let rows = harness::run_sweep(&sweep_cfg)?;
            if cli.out.is_none() {
                emit(None, &sweep::csv_string(&rows))?;
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let dominant = rows.iter().filter(|r| r.dominance).count();
            eprintln!(
                "run {}: {} rows, {} dominated by the bound, {} failed",
                sweep::run_id(&sweep_cfg)?,
                rows.len(),
                dominant,
                failed
            );
        }
        Command::Moments(a) => {
            let q = MomentQuery::new(a.x.clone(), a.power, a.rho)?;
            let seed = cli.seed.unwrap_or(0);
            let (mc, se) = moment_monte_carlo(&q, a.trials, seed)?;
            let value = serde_json::json!({
                "power": q.power(),
                "rho": a.rho,
                "analytic": moment_analytic(&q),
                "enumerated": moment_enumerated(&q).ok(),
                "monte_carlo": mc,
                "monte_carlo_std_error": se,
                "trials": a.trials,
            });
            emit(cli.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))?;
        }
        Command::Gap(a) => {
            let cfg = load_config(cli.config.as_deref())?;
            let mut tcfg = cfg.train.clone().context("config has no [train] section")?;
            if let Some(seed) = cli.seed {
                tcfg.seed = seed;
            }
            let delta = a.delta.unwrap_or(tcfg.delta);
            let trials = a.trials.unwrap_or(tcfg.n_trials);
            let report = harness::gap_experiment(&cfg.network, &tcfg, delta, trials)?;
            eprintln!(
                "held-out risk within the bound in {}/{} trials",
                report.n_holds,
                report.trials.len()
            );
            emit(cli.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
        }
        Command::Slope(a) => {
            let points = match &a.csv {
                Some(path) => points_from_csv(path, a)?,
                None => parse_points(&a.points)?,
            };
            let fit = harness::fit_loglog_slope(&points)?;
            let value = serde_json::json!({ "points": points.len(), "fit": fit });
            emit(cli.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))?;
        }
        Command::Bound(a) => {
            let spec = match &cli.config {
                Some(p) => load_config(Some(p))?.network,
                None => {
                    if a.budgets.is_empty() {
                        bail!("give --budgets or --config");
                    }
                    let k = a.budgets.len() - 1;
                    // widths do not enter the bound; 1 keeps the spec valid
                    NetworkSpec::new(1, vec![1; k], a.budgets.clone(), a.activation, a.input_bound)?
                }
            };
            let complexity = theoretical_complexity_bound(&spec, a.kind, a.rho, a.n)?;
            let mut value = serde_json::json!({
                "type": a.kind,
                "k": spec.depth(),
                "rho": a.rho,
                "n": a.n,
                "output_bound": output_bound(&spec),
                "complexity_bound": complexity,
            });
            if let Some(risk) = a.risk {
                let variant = if a.empirical {
                    BoundVariant::Empirical
                } else {
                    BoundVariant::Expected
                };
                let mut report = generalization_bound(
                    risk,
                    complexity,
                    &LossSpec::square(a.y_bound),
                    &spec,
                    a.delta,
                    a.n,
                    variant,
                )?;
                report.rho = Some(a.rho);
                value["generalization"] = serde_json::to_value(report)?;
            }
            emit(cli.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))?;
        }
    }
    Ok(())
}

fn parse_points(raw: &[String]) -> Result<Vec<(f64, f64)>> {
    raw.iter()
        .map(|p| {
            let (r, v) = p.split_once(':').with_context(|| format!("point {p:?} is not rho:value"))?;
            Ok((r.trim().parse()?, v.trim().parse()?))
        })
        .collect()
}

fn points_from_csv(path: &Path, a: &SlopeArgs) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty CSV")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).with_context(|| format!("no {name} column"));
    let (ti, ki, ri, ni, vi) = (col("type")?, col("k")?, col("rho")?, col("n")?, col(&a.column)?);
    let mut points = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if a.kind.is_some_and(|t| f[ti] != t.name())
            || a.k.is_some_and(|k| f[ki] != k.to_string())
            || a.n.is_some_and(|n| f[ni] != n.to_string())
            || f[vi].is_empty()
        {
            continue;
        }
        points.push((f[ri].parse()?, f[vi].parse()?));
    }
    Ok(points)
}
