use super::encode::is_tie;
use super::{check_memory, codebook_size, stream_rng, summarize, SimConfig, SimMethod, SimStats, Trial, BOOK, SOURCE, TIE};
use crate::ensembles::TieRule;
use crate::error::{usage, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync>;
type Metric = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A real-valued memoryless source with an i.i.d. codeword law and two
/// single-letter distortions.
pub struct RealModel {
    pub source: Sampler,
    pub codeword: Sampler,
    pub d0: Metric,
    pub d1: Metric,
}

impl RealModel {
    /// `X ~ N(0, σ²)`, codewords `N(0, τ²)`, quadratic `d0` and sign
    /// disagreement `d1`.
    pub fn gaussian_sign(sigma2: f64, tau2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && tau2 > 0.0) {
            return Err(usage("variances must be positive"));
        }
        let sx = Normal::new(0.0, sigma2.sqrt()).map_err(|e| usage(e.to_string()))?;
        let sy = Normal::new(0.0, tau2.sqrt()).map_err(|e| usage(e.to_string()))?;
        Ok(RealModel {
            source: Box::new(move |r| sx.sample(r)),
            codeword: Box::new(move |r| sy.sample(r)),
            d0: Box::new(|x, y| (x - y) * (x - y)),
            d1: Box::new(|x, y| if (x >= 0.0) == (y >= 0.0) { 0.0 } else { 1.0 }),
        })
    }
}

/// Explicit-codebook simulation for a real-valued source under an i.i.d.
/// codebook.
pub fn run_trials_real(model: &RealModel, cfg: &SimConfig, d1_target: f64) -> Result<SimStats> {
    cfg.validate()?;
    if cfg.method == SimMethod::TypeLevel {
        return Err(usage("real-valued sources are simulated with explicit codebooks"));
    }
    let m = codebook_size(cfg.n, cfg.rate());
    // Stored as f64, four times a u16 symbol.
    check_memory(m as f64 * 4.0, cfg.n, cfg.memory_budget)?;
    let draw_book = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..m * cfg.n).map(|_| (model.codeword)(rng)).collect() };
    let fixed = cfg.fixed_codebook.then(|| draw_book(&mut stream_rng(cfg.seed, 0, 7)));
    let trials: Vec<Trial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut src = stream_rng(cfg.seed, t, SOURCE);
            let x: Vec<f64> = (0..cfg.n).map(|_| (model.source)(&mut src)).collect();
            let owned;
            let book = match &fixed {
                Some(b) => b,
                None => {
                    owned = draw_book(&mut stream_rng(cfg.seed, t, BOOK));
                    &owned
                }
            };
            let scores: Vec<(f64, f64)> = book
                .chunks(cfg.n)
                .map(|w| {
                    let a: f64 = x.iter().zip(w).map(|(&u, &v)| (model.d0)(u, v)).sum();
                    let b: f64 = x.iter().zip(w).map(|(&u, &v)| (model.d1)(u, v)).sum();
                    (a, b)
                })
                .collect();
            let best = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            let tied: Vec<usize> = (0..m).filter(|&i| is_tie(scores[i].0, best)).collect();
            let i = match cfg.tie_rule {
                TieRule::FirstIndex => tied[0],
                TieRule::Uniform => tied[stream_rng(cfg.seed, t, TIE).random_range(0..tied.len())],
                TieRule::Pessimistic => tied
                    .iter()
                    .copied()
                    .reduce(|a, b| if scores[b].1 > scores[a].1 { b } else { a })
                    .unwrap_or(0),
            };
            let n = cfg.n as f64;
            Trial {
                d0: scores[i].0 / n,
                d1: scores[i].1 / n,
                ties: tied.len() as f64,
                coverage: None,
            }
        })
        .collect();
    Ok(summarize(&trials, cfg, d1_target, SimMethod::Explicit, None))
}
