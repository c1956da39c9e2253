use super::codebook::Codebook;
use crate::ensembles::TieRule;
use crate::error::{usage, Result};
use crate::prob::DistortionMatrix;
use rand::Rng;
use serde::Serialize;

/// Outcome of minimum-`d0` encoding of one source word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Encoding {
    pub index: usize,
    /// Per-symbol distortions of the chosen codeword.
    pub d0: f64,
    pub d1: f64,
    /// Number of codewords attaining the minimum `d0`.
    pub tie_count: usize,
}

/// Joint symbol counts of a source word against a codeword.
pub(crate) fn joint_counts(x: &[u16], w: &[u16], ny: usize, counts: &mut [usize]) {
    counts.iter_mut().for_each(|c| *c = 0);
    for (&a, &b) in x.iter().zip(w) {
        counts[a as usize * ny + b as usize] += 1;
    }
}

/// Additive distortion from joint counts. Summing in a fixed order over
/// counts makes equal joint types give bit-identical totals.
pub(crate) fn total(counts: &[usize], d: &DistortionMatrix) -> f64 {
    counts.iter().zip(d.values()).map(|(&c, &v)| c as f64 * v).sum()
}

pub(crate) fn is_tie(a: f64, best: f64) -> bool {
    (a - best).abs() <= 1e-9 * best.abs().max(1.0)
}

/// Minimum-`d0` encoding with the given tie rule. `rng` is consulted only
/// by the uniform rule.
pub fn encode(
    x: &[u16],
    book: &Codebook,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    tie: TieRule,
    rng: &mut impl Rng,
) -> Result<Encoding> {
    if x.len() != book.n {
        return Err(usage(format!("source word has length {}, codewords {}", x.len(), book.n)));
    }
    if d0.cols() != book.alphabet || d1.cols() != book.alphabet || d0.rows() != d1.rows() {
        return Err(usage("distortion shape does not match the codebook alphabet"));
    }
    if x.iter().any(|&a| a as usize >= d0.rows()) {
        return Err(usage("source symbol outside the distortion rows"));
    }
    let ny = book.alphabet;
    let mut counts = vec![0usize; d0.rows() * ny];
    let scores: Vec<(f64, f64)> = book
        .words()
        .map(|w| {
            joint_counts(x, w, ny, &mut counts);
            (total(&counts, d0), total(&counts, d1))
        })
        .collect();
    let best = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| is_tie(scores[i].0, best)).collect();
    let index = match tie {
        TieRule::FirstIndex => tied[0],
        TieRule::Uniform => tied[rng.random_range(0..tied.len())],
        // The first of the largest-d1 tied words, so the choice is deterministic.
        TieRule::Pessimistic => tied
            .iter()
            .copied()
            .reduce(|a, b| if scores[b].1 > scores[a].1 { b } else { a })
            .unwrap_or(0),
    };
    debug_assert!(scores.iter().all(|s| s.0 >= scores[index].0 || is_tie(s.0, scores[index].0)));
    let n = book.n as f64;
    Ok(Encoding {
        index,
        d0: scores[index].0 / n,
        d1: scores[index].1 / n,
        tie_count: tied.len(),
    })
}
