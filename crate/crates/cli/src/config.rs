use anyhow::{bail, Context, Result};
use mrd_core::montecarlo::SimConfig;
use mrd_core::{DistortionMatrix, EnsembleSpec, Pmf, TieRule, Units};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Built-in example problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Binary,
    Parallel,
    Ternary,
    Gaussian,
}

/// Ensemble selector on the command line. `matched` encodes with `d1`
/// itself and is only available as a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleChoice {
    Cc,
    Iid,
    Superposition,
    Expurgated,
    Matched,
}

impl EnsembleChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleChoice::Cc => "cc",
            EnsembleChoice::Iid => "iid",
            EnsembleChoice::Superposition => "superposition",
            EnsembleChoice::Expurgated => "expurgated",
            EnsembleChoice::Matched => "matched",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A user-supplied discrete problem. `spec` fixes the ensemble and its
/// auxiliaries; for split ensembles its split is re-optimised per rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub source: Pmf,
    pub d0: DistortionMatrix,
    pub d1: DistortionMatrix,
    pub spec: EnsembleSpec,
}

/// Everything a run needs. Written by `--emit-config` and read by
/// `--config`; command-line flags override loaded values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub example: Option<Example>,
    pub problem: Option<CustomProblem>,
    pub ensemble: Option<EnsembleChoice>,
    /// `start:stop:step` or a comma-separated list.
    pub rates: Option<String>,
    pub lambda_grid: Option<String>,
    pub units: Units,
    pub tie_rule: TieRule,
    /// Use the example's closed form instead of the generic solvers.
    pub closed_form: bool,
    /// Weight of the first bit in the parallel example's `d0`.
    pub weight: f64,
    pub sigma2: f64,
    pub tau2: f64,
    pub sim: SimConfig,
    /// `d1` level for the exceedance statistic; defaults to the analytic
    /// value at the simulated rate.
    pub target: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            example: None,
            problem: None,
            ensemble: None,
            rates: None,
            lambda_grid: None,
            units: Units::Bits,
            tie_rule: TieRule::Pessimistic,
            closed_form: false,
            weight: 0.3,
            sigma2: 1.0,
            tau2: 1.0,
            sim: SimConfig::default(),
            target: None,
            output: None,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing config {}", path.display()))
    }

    pub fn check(&self) -> Result<()> {
        match (&self.example, &self.problem) {
            (Some(_), Some(_)) => bail!(usage("give either a named example or a custom problem, not both")),
            (None, None) => bail!(usage("no problem given: use --example or --config")),
            _ => Ok(()),
        }
    }
}

/// A configuration error, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding) or a
/// comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("malformed grid `{s}`"));
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = parts[..] else {
            bail!(bad());
        };
        if !(step.is_finite() && step != 0.0 && start.is_finite() && stop.is_finite()) {
            bail!(bad());
        }
        let span = (stop - start) / step;
        if span < -1e-9 {
            Vec::new()
        } else {
            let count = (span + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                bail!(usage(format!("grid `{s}` has {count} points")));
            }
            // Snapping to 12 decimals keeps `0.05 + 2·0.05` printing as 0.15.
            (0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
        }
    } else {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?
    };
    if values.is_empty() {
        bail!(usage(format!("grid `{s}` is empty")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.05:1.0:0.05").unwrap().len(), 20);
        assert_eq!(parse_grid("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_grid("-0.1:-1.0:-0.3").unwrap().len(), 4);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn config_round_trip() {
        let c = RunConfig {
            example: Some(Example::Binary),
            rates: Some("0.1:0.2:0.1".into()),
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
