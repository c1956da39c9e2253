//! Random-codebook simulation with minimum-`d0` encoding.

mod codebook;
mod continuous;
mod encode;
mod types;

pub use codebook::{
    composition, draw_codebook, explicit_words, keeps_pair, pair_deviation, rounded_type, Codebook,
};
pub use continuous::{run_trials_real, RealModel};
pub use encode::{encode, Encoding};
pub use types::{realized_types, TrialCoverage, MAX_JOINT_TYPES};

use crate::ensembles::{EnsembleSpec, TieRule};
use crate::error::{usage, Result};
use crate::prob::{DistortionMatrix, Pmf};
use crate::units::Rate;
use codebook::{check_memory, draw_with, sample_symbol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use types::{trial_coverage, word_counts, TypeLaw, TypeLevels};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x6d72_6400;

/// Default codebook memory budget in bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 256 << 20;

const SOURCE: u64 = 0;
const BOOK: u64 = 1;
const TIE: u64 = 2;
const COVERAGE: u64 = 3;
const FIXED_BOOK: u64 = 7;

/// Independent generator for one `(trial, purpose)` pair under a seed.
pub fn stream_rng(seed: u64, trial: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(8).wrapping_add(purpose));
    rng
}

/// `max(1, ⌊2^{nR}⌋)`, saturating. A tolerance of `1e-9` in the exponent
/// keeps products like `0.1 · 30` from losing a codeword to rounding.
pub fn codebook_size(n: usize, rate: Rate) -> usize {
    let e = n as f64 * rate.in_bits() + 1e-9;
    if e >= usize::BITS as f64 - 1.0 {
        return usize::MAX;
    }
    (e.exp2().floor() as usize).max(1)
}

/// Natural log of the codebook size, without overflow for large `nR`.
pub fn ln_codebook_size(n: usize, rate: Rate) -> f64 {
    let e = n as f64 * rate.in_bits();
    if e < 50.0 {
        (codebook_size(n, rate) as f64).ln()
    } else {
        e * std::f64::consts::LN_2
    }
}

/// How the encoder is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    /// Explicit books when they fit the memory budget, type-level sampling
    /// otherwise.
    #[default]
    Auto,
    Explicit,
    /// Exact sampling from the joint-type law (constant-composition and
    /// i.i.d. books only).
    TypeLevel,
}

impl SimMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMethod::Auto => "auto",
            SimMethod::Explicit => "explicit",
            SimMethod::TypeLevel => "type_level",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    /// Rate of single-rate books in bits; split ensembles carry their own.
    pub rate_bits: f64,
    pub trials: usize,
    pub seed: u64,
    pub tie_rule: TieRule,
    /// Tolerance for the type-set checks (bits) and for expurgation (ℓ∞).
    pub delta: f64,
    /// Reuse one codebook for every trial.
    pub fixed_codebook: bool,
    /// Bytes allowed for an explicit codebook.
    pub memory_budget: usize,
    pub method: SimMethod,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 100,
            rate_bits: 0.5,
            trials: 100,
            seed: DEFAULT_SEED,
            tie_rule: TieRule::Pessimistic,
            delta: 0.05,
            fixed_codebook: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            method: SimMethod::Auto,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(usage("block length n must be at least 1"));
        }
        if self.trials == 0 {
            return Err(usage("trials must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(usage(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.rate_bits >= 0.0 && self.rate_bits.is_finite()) {
            return Err(usage(format!("rate must be finite and non-negative, got {}", self.rate_bits)));
        }
        Ok(())
    }

    pub fn rate(&self) -> Rate {
        Rate::bits(self.rate_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub mean_d1: f64,
    pub mean_d0: f64,
    /// 5%, 50% and 95% quantiles of the per-symbol `d1`.
    pub d1_quantiles: [f64; 3],
    /// Fraction of trials with per-symbol `d1 ≥ d1_target + delta`.
    pub exceedance: f64,
    pub mean_tie_count: f64,
    /// Mean fraction of lower-set joint types realised, for
    /// constant-composition books small enough to enumerate.
    pub type_coverage: Option<f64>,
    /// Rate carried after expurgation, in bits.
    pub effective_rate: Option<f64>,
    pub d1_target: f64,
    pub trials: usize,
    pub n: usize,
    pub method: SimMethod,
}

/// Pairwise summation, so the total does not depend on how trials were
/// scheduled.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Trial {
    pub d0: f64,
    pub d1: f64,
    pub ties: f64,
    pub coverage: Option<f64>,
}

pub(crate) fn summarize(
    trials: &[Trial],
    cfg: &SimConfig,
    d1_target: f64,
    method: SimMethod,
    effective_rate: Option<f64>,
) -> SimStats {
    let k = trials.len() as f64;
    let d1: Vec<f64> = trials.iter().map(|t| t.d1).collect();
    let d0: Vec<f64> = trials.iter().map(|t| t.d0).collect();
    let ties: Vec<f64> = trials.iter().map(|t| t.ties).collect();
    let exceed = d1.iter().filter(|&&v| v >= d1_target + cfg.delta).count() as f64;
    let mut sorted = d1.clone();
    sorted.sort_by(f64::total_cmp);
    let coverage: Option<Vec<f64>> = trials.iter().map(|t| t.coverage).collect();
    SimStats {
        mean_d1: pairwise_sum(&d1) / k,
        mean_d0: pairwise_sum(&d0) / k,
        d1_quantiles: [quantile(&sorted, 0.05), quantile(&sorted, 0.5), quantile(&sorted, 0.95)],
        exceedance: exceed / k,
        mean_tie_count: pairwise_sum(&ties) / k,
        type_coverage: coverage.map(|c| pairwise_sum(&c) / k),
        effective_rate,
        d1_target,
        trials: trials.len(),
        n: cfg.n,
        method,
    }
}

fn reconstruction_size(spec: &EnsembleSpec) -> usize {
    match spec {
        EnsembleSpec::Cc { q } | EnsembleSpec::Iid { q } => q.alphabet_size(),
        EnsembleSpec::Superposition { q_uxhat, .. } => q_uxhat.shape().get(1).copied().unwrap_or(0),
        EnsembleSpec::ExpurgatedParallel { psi, .. } => psi.output_size,
    }
}

/// Draws a source word of length `n` from `source`.
pub fn draw_source(source: &Pmf, n: usize, rng: &mut ChaCha8Rng) -> Vec<u16> {
    (0..n).map(|_| sample_symbol(source.probs(), rng)).collect()
}

fn resolve_method(spec: &EnsembleSpec, cfg: &SimConfig) -> Result<SimMethod> {
    let single = matches!(spec, EnsembleSpec::Cc { .. } | EnsembleSpec::Iid { .. });
    let fits = check_memory(explicit_words(spec, cfg.n, cfg.rate()), cfg.n, cfg.memory_budget);
    match cfg.method {
        SimMethod::Explicit => fits.map(|_| SimMethod::Explicit),
        SimMethod::TypeLevel if !single => {
            Err(usage("type-level sampling covers constant-composition and i.i.d. books only"))
        }
        SimMethod::TypeLevel if cfg.fixed_codebook => {
            Err(usage("a fixed codebook must be drawn explicitly"))
        }
        SimMethod::TypeLevel => Ok(SimMethod::TypeLevel),
        SimMethod::Auto => match fits {
            Ok(()) => Ok(SimMethod::Explicit),
            Err(_) if single && !cfg.fixed_codebook => Ok(SimMethod::TypeLevel),
            Err(e) => Err(e),
        },
    }
}

/// Runs independent encoding trials and aggregates the per-symbol
/// distortions.
///
/// Each trial draws a fresh source word and, unless `fixed_codebook` is
/// set, a fresh codebook. Every random draw comes from a stream keyed by
/// `(seed, trial, purpose)`, so results do not depend on thread count.
pub fn run_trials(
    source: &Pmf,
    spec: &EnsembleSpec,
    cfg: &SimConfig,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    d1_target: f64,
) -> Result<SimStats> {
    cfg.validate()?;
    let ny = reconstruction_size(spec);
    for d in [d0, d1] {
        if d.rows() != source.alphabet_size() || d.cols() != ny {
            return Err(usage(format!(
                "distortion is {}x{}, expected {}x{ny}",
                d.rows(),
                d.cols(),
                source.alphabet_size()
            )));
        }
    }
    let method = resolve_method(spec, cfg)?;
    let rate = cfg.rate();
    let ln_m = ln_codebook_size(cfg.n, rate);
    let fixed = if cfg.fixed_codebook {
        let mut rng = stream_rng(cfg.seed, 0, FIXED_BOOK);
        Some(draw_with(spec, cfg.n, rate, cfg.delta, cfg.memory_budget, &mut rng)?)
    } else {
        None
    };
    let cc_q = match spec {
        EnsembleSpec::Cc { q } => Some(q),
        _ => None,
    };

    let run = |t: usize| -> Result<(Trial, Option<f64>)> {
        let t64 = t as u64;
        let x = draw_source(source, cfg.n, &mut stream_rng(cfg.seed, t64, SOURCE));
        let mut tie_rng = stream_rng(cfg.seed, t64, TIE);
        let mut cov_rng = stream_rng(cfg.seed, t64, COVERAGE);
        match method {
            SimMethod::TypeLevel => {
                let rows = word_counts(&x, source.alphabet_size());
                let cols;
                let law = match spec {
                    EnsembleSpec::Cc { q } => {
                        cols = composition(q, cfg.n)?;
                        TypeLaw::Cc(&cols)
                    }
                    EnsembleSpec::Iid { q } => TypeLaw::Iid(q.probs()),
                    _ => unreachable!("resolved to explicit"),
                };
                let levels = TypeLevels::new(&rows, law, d0, d1)?;
                let (a, b, ties) = levels.sample(ln_m, cfg.tie_rule, &mut tie_rng);
                let coverage = cc_q
                    .map(|q| trial_coverage(&x, source.alphabet_size(), q, cfg.rate_bits, cfg.delta, ln_m, None, &mut cov_rng))
                    .transpose()
                    .ok()
                    .flatten()
                    .map(|c| c.fraction());
                let n = cfg.n as f64;
                Ok((Trial { d0: a / n, d1: b / n, ties, coverage }, None))
            }
            _ => {
                let owned;
                let book = match &fixed {
                    Some(b) => b,
                    None => {
                        let mut rng = stream_rng(cfg.seed, t64, BOOK);
                        owned = draw_with(spec, cfg.n, rate, cfg.delta, cfg.memory_budget, &mut rng)?;
                        &owned
                    }
                };
                let e = encode(&x, book, d0, d1, cfg.tie_rule, &mut tie_rng)?;
                let coverage = cc_q
                    .map(|q| trial_coverage(&x, source.alphabet_size(), q, cfg.rate_bits, cfg.delta, ln_m, Some(book), &mut cov_rng))
                    .transpose()
                    .ok()
                    .flatten()
                    .map(|c| c.fraction());
                let eff = matches!(spec, EnsembleSpec::ExpurgatedParallel { .. }).then(|| book.effective_rate_bits());
                Ok((
                    Trial {
                        d0: e.d0,
                        d1: e.d1,
                        ties: e.tie_count as f64,
                        coverage,
                    },
                    eff,
                ))
            }
        }
    };
    let results: Vec<(Trial, Option<f64>)> = (0..cfg.trials).into_par_iter().map(run).collect::<Result<_>>()?;
    let trials: Vec<Trial> = results.iter().map(|r| r.0).collect();
    let eff: Option<Vec<f64>> = results.iter().map(|r| r.1).collect();
    let eff = eff.map(|v| pairwise_sum(&v) / v.len() as f64);
    Ok(summarize(&trials, cfg, d1_target, method, eff))
}

/// Type-set coverage check over `config.trials` source words.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub per_trial: Vec<TrialCoverage>,
    /// Mean fraction of lower-set types realised.
    pub mean_coverage: f64,
    pub min_coverage: f64,
    /// Fraction of trials with no realised upper-set violation.
    pub violation_free: f64,
}

/// For a constant-composition book at rate `R = config.rate_bits`,
/// enumerates the joint types of codewords against a random source word
/// and reports how many types with `I ≤ R - δ` are realised by some
/// codeword and whether any realised type has `I > R + δ`.
///
/// Books that fit the memory budget are drawn explicitly. Larger ones are
/// handled type by type: each type is realised with its exact marginal
/// probability `1 - (1 - P(t))^M`, independently across types.
pub fn check_type_coverage(source: &Pmf, spec: &EnsembleSpec, cfg: &SimConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let EnsembleSpec::Cc { q } = spec else {
        return Err(usage("type coverage is defined for constant-composition books"));
    };
    let rate = cfg.rate();
    let ln_m = ln_codebook_size(cfg.n, rate);
    let explicit = match cfg.method {
        SimMethod::TypeLevel => false,
        SimMethod::Explicit => {
            check_memory(explicit_words(spec, cfg.n, rate), cfg.n, cfg.memory_budget)?;
            true
        }
        SimMethod::Auto => check_memory(explicit_words(spec, cfg.n, rate), cfg.n, cfg.memory_budget).is_ok(),
    };
    let fixed = if cfg.fixed_codebook && explicit {
        let mut rng = stream_rng(cfg.seed, 0, FIXED_BOOK);
        Some(draw_with(spec, cfg.n, rate, cfg.delta, cfg.memory_budget, &mut rng)?)
    } else {
        None
    };
    let per_trial: Vec<TrialCoverage> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let x = draw_source(source, cfg.n, &mut stream_rng(cfg.seed, t, SOURCE));
            let owned;
            let book = if !explicit {
                None
            } else if let Some(b) = &fixed {
                Some(b)
            } else {
                let mut rng = stream_rng(cfg.seed, t, BOOK);
                owned = draw_with(spec, cfg.n, rate, cfg.delta, cfg.memory_budget, &mut rng)?;
                Some(&owned)
            };
            let mut rng = stream_rng(cfg.seed, t, COVERAGE);
            trial_coverage(&x, source.alphabet_size(), q, cfg.rate_bits, cfg.delta, ln_m, book, &mut rng)
        })
        .collect::<Result<_>>()?;
    let fr: Vec<f64> = per_trial.iter().map(TrialCoverage::fraction).collect();
    let k = fr.len() as f64;
    Ok(CoverageReport {
        mean_coverage: pairwise_sum(&fr) / k,
        min_coverage: fr.iter().copied().fold(f64::INFINITY, f64::min),
        violation_free: per_trial.iter().filter(|c| c.violations == 0).count() as f64 / k,
        per_trial,
    })
}
