//! `mrd`: mismatched distortion-rate curves, examples, simulation and
//! verification.

mod commands;
mod config;
mod table;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::{EnsembleChoice, Example, Format, RunConfig, UsageError};
use mrd_core::montecarlo::SimMethod;
use mrd_core::{MrdError, TieRule, Units};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mrd", version, about = "Achievable distortion-rate bounds under mismatched encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic curve over a rate grid.
    Curve(CurveArgs),
    /// Random-codebook simulation.
    Simulate(SimArgs),
    /// Cross-checks against oracles, reductions and closed forms.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: verify::Suite,
    },
    /// Closed-form reference curves of a named example.
    Example(ExampleArgs),
}

#[derive(Args)]
struct Common {
    /// Named example problem.
    #[arg(long, value_enum)]
    example: Option<Example>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleChoice>,
    /// pessimistic, uniform or first_index.
    #[arg(long)]
    tie: Option<TieRule>,
    /// Units of rates given on the command line (bits or nats).
    #[arg(long)]
    units: Option<Units>,
    /// First-bit weight of the parallel example.
    #[arg(long)]
    weight: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the resolved configuration to this path.
    #[arg(long)]
    emit_config: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    common: Common,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    rates: Option<String>,
    /// Tilt grid for the Gaussian example.
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    /// Use the example's closed form.
    #[arg(long)]
    closed_form: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    fixed_codebook: bool,
    /// auto, explicit or type_level.
    #[arg(long, value_parser = parse_method)]
    method: Option<SimMethod>,
    /// Bytes allowed for an explicit codebook.
    #[arg(long)]
    memory_budget: Option<usize>,
    /// `d1` level for the exceedance statistic.
    #[arg(long)]
    target: Option<f64>,
    /// Append the result row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(value_enum)]
    name: Example,
    #[arg(long, allow_hyphen_values = true)]
    rates: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    #[arg(long)]
    weight: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn parse_method(s: &str) -> Result<SimMethod, String> {
    match s {
        "auto" => Ok(SimMethod::Auto),
        "explicit" => Ok(SimMethod::Explicit),
        "type_level" | "type-level" => Ok(SimMethod::TypeLevel),
        other => Err(format!("unknown method `{other}` (auto, explicit, type_level)")),
    }
}

fn base_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(e) = c.example {
        cfg.example = Some(e);
        cfg.problem = None;
    }
    if c.ensemble.is_some() {
        cfg.ensemble = c.ensemble;
    }
    if let Some(t) = c.tie {
        cfg.tie_rule = t;
        cfg.sim.tie_rule = t;
    }
    if let Some(u) = c.units {
        cfg.units = u;
    }
    if let Some(w) = c.weight {
        cfg.weight = w;
    }
    if let Some(v) = c.sigma2 {
        cfg.sigma2 = v;
    }
    if let Some(v) = c.tau2 {
        cfg.tau2 = v;
    }
    if c.output.is_some() {
        cfg.output.clone_from(&c.output);
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn finish_config(cfg: &RunConfig, c: &Common) -> anyhow::Result<()> {
    if let Some(p) = &c.emit_config {
        cfg.save(p)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Curve(a) => {
            let mut cfg = base_config(&a.common)?;
            if a.rates.is_some() {
                cfg.rates = a.rates;
            }
            if a.lambda_grid.is_some() {
                cfg.lambda_grid = a.lambda_grid;
            }
            cfg.closed_form |= a.closed_form;
            finish_config(&cfg, &a.common)?;
            commands::cmd_curve(&cfg)?;
        }
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.common)?;
            if cfg.format == Format::Csv && a.common.format.is_none() && a.common.config.is_none() {
                cfg.format = Format::Json;
            }
            let s = &mut cfg.sim;
            if let Some(v) = a.n {
                s.n = v;
            }
            if let Some(v) = a.rate {
                s.rate_bits = commands::to_bits(cfg.units, v);
            }
            if let Some(v) = a.trials {
                s.trials = v;
            }
            if let Some(v) = a.seed {
                s.seed = v;
            }
            if let Some(v) = a.delta {
                s.delta = v;
            }
            s.fixed_codebook |= a.fixed_codebook;
            if let Some(v) = a.method {
                s.method = v;
            }
            if let Some(v) = a.memory_budget {
                s.memory_budget = v;
            }
            if a.target.is_some() {
                cfg.target = a.target;
            }
            finish_config(&cfg, &a.common)?;
            commands::cmd_simulate(&cfg, a.csv.as_deref())?;
        }
        Command::Verify { suite } => {
            let checks = verify::run(suite)?;
            let mut failed = Vec::new();
            for c in &checks {
                println!("{}", c.line());
                if !c.passed() {
                    failed.push(c.name.clone());
                }
            }
            if !failed.is_empty() {
                for f in &failed {
                    eprintln!("failing check: {f}");
                }
                return Ok(ExitCode::from(1));
            }
            println!("{} checks passed", checks.len());
        }
        Command::Example(a) => {
            let cfg = RunConfig {
                rates: a.rates,
                lambda_grid: a.lambda_grid,
                weight: a.weight.unwrap_or(0.3),
                output: a.output,
                format: a.format.unwrap_or_default(),
                ..Default::default()
            };
            let rows = commands::example_rows(&cfg, a.name)?;
            commands::write_rows(&rows, &cfg)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// 3 for solver non-convergence, 2 for everything else a user can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<MrdError>() {
            return match e {
                MrdError::Convergence { .. } | MrdError::SamplingBudget(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("MRD_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: MRD_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
