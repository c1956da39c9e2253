use crate::config::{parse_grid, usage, EnsembleChoice, Example, Format, RunConfig};
use crate::table::{append_csv, emit, to_csv, Row};
use anyhow::{bail, Result};
use mrd_core::closed_form::{
    binary_curve, gaussian_curve, gaussian_matched_rate, h2_inverse_lower, parallel_curve, ternary_cc,
    ternary_matched, BinaryEnsemble, ParallelEnsemble,
};
use mrd_core::dual::{mismatched_d1, GaussianModel};
use mrd_core::ensembles::{best_split, d1bar_cc, d1bar_iid, evaluate};
use mrd_core::montecarlo::{run_trials, run_trials_real, RealModel, SimStats};
use mrd_core::problems::{self, DiscreteProblem};
use mrd_core::{CurvePoint, DistortionMatrix, EnsembleSpec, Pmf, Rate, TieRule, Units};
use serde::Serialize;
use std::path::Path;

fn default_ensemble(example: Option<Example>) -> EnsembleChoice {
    match example {
        Some(Example::Parallel) => EnsembleChoice::Expurgated,
        Some(Example::Ternary) => EnsembleChoice::Superposition,
        _ => EnsembleChoice::Iid,
    }
}

fn unsupported(example: Example, ens: EnsembleChoice) -> anyhow::Error {
    usage(format!("the {example:?} example has no {} ensemble", ens.as_str()).to_lowercase()).into()
}

fn closed(rate: f64, d1: f64, ens: EnsembleChoice, tie: TieRule) -> Row {
    Row::closed_form(rate, d1, ens.as_str(), tie.as_str())
}

/// Ternary superposition at total rate `r` bits with the cloud rate of the
/// matched solution.
fn ternary_split(r: f64) -> Result<EnsembleSpec> {
    let t = ternary_matched(r)?;
    Ok(problems::ternary_spec(Rate::bits(t.r0_bits), Rate::bits(r - t.r0_bits)))
}

/// One curve row for a named discrete example.
fn example_row(cfg: &RunConfig, example: Example, ens: EnsembleChoice, r: f64) -> Result<Row> {
    let tie = cfg.tie_rule;
    let rate = Rate::bits(r);
    let generic = |p: DiscreteProblem, spec: EnsembleSpec| -> Result<Row> {
        Ok(Row::analytic(&evaluate(&spec, &p.source, &p.d0, &p.d1, rate)?))
    };
    match (example, ens) {
        (Example::Binary, EnsembleChoice::Matched) => {
            Ok(closed(r, binary_curve(r, BinaryEnsemble::Matched, tie)?, ens, tie))
        }
        (Example::Binary, EnsembleChoice::Cc | EnsembleChoice::Iid) if cfg.closed_form => {
            let b = if ens == EnsembleChoice::Cc { BinaryEnsemble::Cc } else { BinaryEnsemble::Iid };
            Ok(closed(r, binary_curve(r, b, tie)?, ens, tie))
        }
        (Example::Binary, EnsembleChoice::Cc) => generic(problems::binary(), EnsembleSpec::Cc { q: Pmf::uniform(2) }),
        (Example::Binary, EnsembleChoice::Iid) => generic(problems::binary(), EnsembleSpec::Iid { q: Pmf::uniform(2) }),
        (Example::Parallel, EnsembleChoice::Matched) => {
            Ok(closed(r, parallel_curve(r, cfg.weight, ParallelEnsemble::Matched)?, ens, tie))
        }
        (Example::Parallel, EnsembleChoice::Cc) if cfg.closed_form => {
            Ok(closed(r, parallel_curve(r, cfg.weight, ParallelEnsemble::Independent)?, ens, tie))
        }
        (Example::Parallel, EnsembleChoice::Expurgated) if cfg.closed_form => {
            Ok(closed(r, parallel_curve(r, cfg.weight, ParallelEnsemble::Expurgated)?, ens, tie))
        }
        (Example::Parallel, EnsembleChoice::Cc) => generic(problems::parallel(cfg.weight), EnsembleSpec::Cc { q: Pmf::uniform(4) }),
        (Example::Parallel, EnsembleChoice::Iid) => generic(problems::parallel(cfg.weight), EnsembleSpec::Iid { q: Pmf::uniform(4) }),
        (Example::Parallel, EnsembleChoice::Expurgated) => generic(problems::parallel(cfg.weight), problems::parallel_spec(rate)),
        (Example::Ternary, EnsembleChoice::Matched) => Ok(closed(r, ternary_matched(r)?.d1, ens, tie)),
        (Example::Ternary, EnsembleChoice::Cc) if cfg.closed_form => Ok(closed(r, ternary_cc(r)?, ens, tie)),
        (Example::Ternary, EnsembleChoice::Superposition) if cfg.closed_form => {
            // Superposition with the matched split attains the matched curve.
            Ok(closed(r, ternary_matched(r)?.d1, ens, tie))
        }
        (Example::Ternary, EnsembleChoice::Cc) => generic(problems::ternary(), EnsembleSpec::Cc { q: Pmf::uniform(3) }),
        (Example::Ternary, EnsembleChoice::Iid) => generic(problems::ternary(), EnsembleSpec::Iid { q: Pmf::uniform(3) }),
        (Example::Ternary, EnsembleChoice::Superposition) => generic(problems::ternary(), ternary_split(r)?),
        (Example::Gaussian, EnsembleChoice::Matched) => {
            if !(0.0..=1.0).contains(&r) {
                bail!(mrd_core::MrdError::Domain(format!("matched sign rate {r} is outside [0, 1] bits")));
            }
            Ok(closed(r, h2_inverse_lower(1.0 - r)?, ens, tie))
        }
        (Example::Gaussian, EnsembleChoice::Iid) => {
            let m = GaussianModel::sign(cfg.sigma2, cfg.tau2)?;
            Ok(Row::analytic(&mismatched_d1(&m, rate)?))
        }
        (e, ens) => Err(unsupported(e, ens)),
    }
}

fn custom_row(cfg: &RunConfig, r: f64) -> Result<Row> {
    let p = cfg.problem.as_ref().expect("checked");
    let rate = Rate::bits(r);
    let point: CurvePoint = match &p.spec {
        EnsembleSpec::Cc { q } => d1bar_cc(&p.source, q, &p.d0, &p.d1, rate)?,
        EnsembleSpec::Iid { q } => d1bar_iid(&p.source, q, &p.d0, &p.d1, rate)?,
        split => best_split(split, &p.source, &p.d0, &p.d1, rate, None)?.0,
    };
    Ok(Row::analytic(&point))
}

fn rates_bits(cfg: &RunConfig, grid: &str) -> Result<Vec<f64>> {
    Ok(parse_grid(grid)?.into_iter().map(|v| to_bits(cfg.units, v)).collect())
}

/// Converts a command-line rate to bits, leaving bit values untouched.
pub fn to_bits(units: Units, v: f64) -> f64 {
    match units {
        Units::Bits => v,
        Units::Nats => Rate::nats(v).in_bits(),
    }
}

/// Rows for the Gaussian example on a `λ` grid: the mismatched recipe and
/// the matched rate at the same `d1`.
fn gaussian_lambda_rows(cfg: &RunConfig, grid: &str) -> Result<Vec<Row>> {
    let lambdas = parse_grid(grid)?;
    let mut rows = Vec::new();
    for p in gaussian_curve(&lambdas, cfg.sigma2, cfg.tau2)? {
        let mut row = Row::analytic(&p);
        row.source = "closed_form".into();
        rows.push(row);
        rows.push(closed(gaussian_matched_rate(p.d1)?, p.d1, EnsembleChoice::Matched, TieRule::FirstIndex));
    }
    Ok(rows)
}

pub fn curve_rows(cfg: &RunConfig) -> Result<Vec<Row>> {
    cfg.check()?;
    if let (Some(Example::Gaussian), Some(grid)) = (cfg.example, &cfg.lambda_grid) {
        return gaussian_lambda_rows(cfg, grid);
    }
    let Some(grid) = &cfg.rates else {
        bail!(usage("no rate grid: use --rates start:stop:step"));
    };
    let rates = rates_bits(cfg, grid)?;
    match cfg.example {
        Some(e) => {
            let ens = cfg.ensemble.unwrap_or(default_ensemble(Some(e)));
            rates.iter().map(|&r| example_row(cfg, e, ens, r)).collect()
        }
        None => rates.iter().map(|&r| custom_row(cfg, r)).collect(),
    }
}

pub fn write_rows(rows: &[Row], cfg: &RunConfig) -> Result<()> {
    let text = match cfg.format {
        Format::Csv => to_csv(rows),
        Format::Json => serde_json::to_string_pretty(rows)? + "\n",
    };
    emit(&text, cfg.output.as_deref())
}

pub fn cmd_curve(cfg: &RunConfig) -> Result<()> {
    let rows = curve_rows(cfg)?;
    write_rows(&rows, cfg)
}

#[derive(Debug, Serialize)]
pub struct SimReport<'a> {
    pub config: &'a RunConfig,
    pub stats: SimStats,
    pub row: Row,
}

/// The discrete problem and ensemble simulated for a config.
fn sim_problem(cfg: &RunConfig) -> Result<(Pmf, EnsembleSpec, DistortionMatrix, DistortionMatrix)> {
    let r = cfg.sim.rate_bits;
    let rate = Rate::bits(r);
    if let Some(p) = &cfg.problem {
        return Ok((p.source.clone(), p.spec.clone(), p.d0.clone(), p.d1.clone()));
    }
    let e = cfg.example.expect("checked");
    let ens = cfg.ensemble.unwrap_or(default_ensemble(Some(e)));
    let (p, spec) = match (e, ens) {
        (Example::Binary, EnsembleChoice::Cc) => (problems::binary(), EnsembleSpec::Cc { q: Pmf::uniform(2) }),
        (Example::Binary, EnsembleChoice::Iid) => (problems::binary(), EnsembleSpec::Iid { q: Pmf::uniform(2) }),
        (Example::Parallel, EnsembleChoice::Cc) => (problems::parallel(cfg.weight), EnsembleSpec::Cc { q: Pmf::uniform(4) }),
        (Example::Parallel, EnsembleChoice::Iid) => (problems::parallel(cfg.weight), EnsembleSpec::Iid { q: Pmf::uniform(4) }),
        (Example::Parallel, EnsembleChoice::Expurgated) => (problems::parallel(cfg.weight), problems::parallel_spec(rate)),
        (Example::Ternary, EnsembleChoice::Cc) => (problems::ternary(), EnsembleSpec::Cc { q: Pmf::uniform(3) }),
        (Example::Ternary, EnsembleChoice::Iid) => (problems::ternary(), EnsembleSpec::Iid { q: Pmf::uniform(3) }),
        (Example::Ternary, EnsembleChoice::Superposition) => (problems::ternary(), ternary_split(r)?),
        (e, ens) => return Err(unsupported(e, ens)),
    };
    Ok((p.source, spec, p.d0, p.d1))
}

/// Analytic `d1` at the simulated rate, aware of the tie rule where the
/// closed form is.
fn default_target(cfg: &RunConfig) -> Result<f64> {
    let r = cfg.sim.rate_bits;
    let ens = cfg.ensemble.unwrap_or(default_ensemble(cfg.example));
    match cfg.example {
        Some(Example::Binary) => {
            let b = if ens == EnsembleChoice::Cc { BinaryEnsemble::Cc } else { BinaryEnsemble::Iid };
            Ok(binary_curve(r, b, cfg.sim.tie_rule)?)
        }
        Some(Example::Gaussian) => {
            Ok(mismatched_d1(&GaussianModel::sign(cfg.sigma2, cfg.tau2)?, Rate::bits(r))?.d1)
        }
        Some(e) => Ok(example_row(cfg, e, ens, r)?.d1),
        None => {
            let (source, spec, d0, d1) = sim_problem(cfg)?;
            Ok(evaluate(&spec, &source, &d0, &d1, Rate::bits(r))?.d1)
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(SimStats, Row)> {
    cfg.check()?;
    let target = match cfg.target {
        Some(t) => t,
        None => default_target(cfg)?,
    };
    let (stats, ens) = if cfg.example == Some(Example::Gaussian) {
        let ens = cfg.ensemble.unwrap_or(EnsembleChoice::Iid);
        if ens != EnsembleChoice::Iid {
            return Err(unsupported(Example::Gaussian, ens));
        }
        let m = RealModel::gaussian_sign(cfg.sigma2, cfg.tau2)?;
        (run_trials_real(&m, &cfg.sim, target)?, "iid".to_string())
    } else {
        let (source, spec, d0, d1) = sim_problem(cfg)?;
        let ens = spec.kind().as_str().to_string();
        (run_trials(&source, &spec, &cfg.sim, &d0, &d1, target)?, ens)
    };
    log::info!("simulated {} trials ({})", stats.trials, stats.method.as_str());
    let row = Row {
        rate_bits: cfg.sim.rate_bits,
        d0: Some(stats.mean_d0),
        d1: stats.mean_d1,
        d1_min: None,
        d1_max: None,
        ensemble: ens,
        tie_rule: cfg.sim.tie_rule.as_str().into(),
        source: "simulation".into(),
        n: Some(cfg.sim.n),
        trials: Some(cfg.sim.trials),
        seed: Some(cfg.sim.seed),
    };
    Ok((stats, row))
}

pub fn cmd_simulate(cfg: &RunConfig, csv: Option<&Path>) -> Result<()> {
    let (stats, row) = simulate(cfg)?;
    if let Some(p) = csv {
        append_csv(std::slice::from_ref(&row), p)?;
    }
    let text = match cfg.format {
        Format::Csv => to_csv(std::slice::from_ref(&row)),
        Format::Json => {
            serde_json::to_string_pretty(&SimReport {
                config: cfg,
                stats,
                row,
            })? + "\n"
        }
    };
    emit(&text, cfg.output.as_deref())
}

/// Closed-form reference curves for a named example.
pub fn example_rows(cfg: &RunConfig, example: Example) -> Result<Vec<Row>> {
    let c = RunConfig {
        example: Some(example),
        closed_form: true,
        ..cfg.clone()
    };
    if example == Example::Gaussian {
        let grid = c.lambda_grid.clone().unwrap_or_else(|| "-0.1:-10:-0.1".into());
        return gaussian_lambda_rows(&c, &grid);
    }
    let (grid, sets): (&str, Vec<(EnsembleChoice, TieRule)>) = match example {
        Example::Binary => (
            "0.05:1.0:0.05",
            vec![
                (EnsembleChoice::Matched, TieRule::Pessimistic),
                (EnsembleChoice::Cc, TieRule::Pessimistic),
                (EnsembleChoice::Iid, TieRule::Pessimistic),
                (EnsembleChoice::Iid, TieRule::Uniform),
            ],
        ),
        Example::Parallel => (
            "0.1:2.0:0.1",
            vec![
                (EnsembleChoice::Matched, TieRule::Pessimistic),
                (EnsembleChoice::Expurgated, TieRule::Pessimistic),
                (EnsembleChoice::Cc, TieRule::Pessimistic),
            ],
        ),
        Example::Ternary => (
            "0.1:1.5:0.1",
            vec![
                (EnsembleChoice::Matched, TieRule::Pessimistic),
                (EnsembleChoice::Superposition, TieRule::Pessimistic),
                (EnsembleChoice::Cc, TieRule::Pessimistic),
            ],
        ),
        Example::Gaussian => unreachable!(),
    };
    let rates = rates_bits(&c, c.rates.as_deref().unwrap_or(grid))?;
    let mut rows = Vec::new();
    for (ens, tie) in sets {
        let cc = RunConfig { tie_rule: tie, ..c.clone() };
        for &r in &rates {
            rows.push(example_row(&cc, example, ens, r)?);
        }
    }
    Ok(rows)
}
