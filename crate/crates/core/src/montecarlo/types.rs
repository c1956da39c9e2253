//! Joint-type enumeration and exact type-level sampling of the encoder.
//!
//! For constant-composition and i.i.d. books the pair `(d0, d1)` of a
//! codeword against a fixed source word depends only on their joint type,
//! and codewords are independent. The encoder output can therefore be drawn
//! exactly from the per-codeword type law without materialising `M` words,
//! which keeps `M = 2^{nR}` books at `n = 400` within reach.

use super::codebook::{composition, Codebook};
use super::encode::{is_tie, joint_counts, total};
use crate::ensembles::TieRule;
use crate::error::{usage, MrdError, Result};
use crate::prob::{DistortionMatrix, Pmf};
use rand::Rng;
use std::collections::HashSet;

/// Largest number of joint types enumerated for one source word.
pub const MAX_JOINT_TYPES: usize = 2_000_000;

/// How codewords are drawn, as far as the joint type law is concerned.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TypeLaw<'a> {
    /// Uniform over the type class with these column counts.
    Cc(&'a [usize]),
    /// Entrywise from `q`.
    Iid(&'a [f64]),
}

pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Symbol counts of a word.
pub(crate) fn word_counts(x: &[u16], size: usize) -> Vec<usize> {
    let mut c = vec![0; size];
    for &a in x {
        c[a as usize] += 1;
    }
    c
}

/// Visits every joint type with row counts `rows` that a codeword drawn
/// from `law` can produce, with the log-probability of producing it.
pub(crate) fn for_each_type(
    rows: &[usize],
    law: TypeLaw<'_>,
    mut visit: impl FnMut(&[usize], f64),
) -> Result<usize> {
    let n: usize = rows.iter().sum();
    let ny = match law {
        TypeLaw::Cc(cols) => cols.len(),
        TypeLaw::Iid(q) => q.len(),
    };
    let lf = ln_factorials(n);
    let base = match law {
        TypeLaw::Cc(cols) => cols.iter().map(|&m| lf[m]).sum::<f64>() - lf[n],
        TypeLaw::Iid(_) => 0.0,
    };
    let ln_q: Vec<f64> = match law {
        TypeLaw::Iid(q) => q.iter().map(|p| p.ln()).collect(),
        TypeLaw::Cc(_) => vec![0.0; ny],
    };
    let caps: Vec<usize> = match law {
        TypeLaw::Cc(cols) => cols.to_vec(),
        TypeLaw::Iid(_) => vec![n; ny],
    };
    let mut st = Walk {
        rows,
        ny,
        lf: &lf,
        ln_q: &ln_q,
        counts: vec![0; rows.len() * ny],
        caps,
        visited: 0,
        overflow: false,
    };
    st.row(0, base, &mut visit);
    if st.overflow {
        return Err(MrdError::Enumeration(format!(
            "more than {MAX_JOINT_TYPES} joint types at n = {n}"
        )));
    }
    Ok(st.visited)
}

struct Walk<'a> {
    rows: &'a [usize],
    ny: usize,
    lf: &'a [f64],
    ln_q: &'a [f64],
    counts: Vec<usize>,
    caps: Vec<usize>,
    visited: usize,
    overflow: bool,
}

impl Walk<'_> {
    fn row(&mut self, a: usize, ln_p: f64, visit: &mut impl FnMut(&[usize], f64)) {
        if self.overflow {
            return;
        }
        if a == self.rows.len() {
            self.visited += 1;
            if self.visited > MAX_JOINT_TYPES {
                self.overflow = true;
                return;
            }
            visit(&self.counts, ln_p);
            return;
        }
        let ln_p = ln_p + self.lf[self.rows[a]];
        self.cell(a, 0, self.rows[a], ln_p, visit);
    }

    fn cell(&mut self, a: usize, b: usize, rem: usize, ln_p: f64, visit: &mut impl FnMut(&[usize], f64)) {
        let last = b + 1 == self.ny;
        let hi = rem.min(self.caps[b]);
        let lo = if last { rem } else { 0 };
        if lo > hi {
            return;
        }
        for c in lo..=hi {
            let w = if c == 0 { 0.0 } else { c as f64 * self.ln_q[b] };
            if w == f64::NEG_INFINITY {
                break;
            }
            let next = ln_p - self.lf[c] + w;
            self.counts[a * self.ny + b] = c;
            self.caps[b] -= c;
            if last {
                self.row(a + 1, next, visit);
            } else {
                self.cell(a, b + 1, rem - c, next, visit);
            }
            self.caps[b] += c;
            if self.overflow {
                break;
            }
        }
        self.counts[a * self.ny + b] = 0;
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `M · ln(1 - x)` from `ln M` and `ln x`, accurate for tiny `x` and huge `M`.
fn m_log1m(ln_m: f64, ln_x: f64) -> f64 {
    if ln_x == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_x >= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_neg = if ln_x < -30.0 { ln_x } else { (-(-ln_x.exp()).ln_1p()).ln() };
    -(ln_m + ln_neg).exp()
}

/// `P(max ≤ w)` for the largest of `K ~ Bin(M, π) | K ≥ 1` draws, from
/// `a = M ln(1 - π(1 - F(w)))` and `b = M ln(1 - π)`.
fn max_cdf(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a.exp();
    }
    // e^a - e^b, written so that a huge negative b cannot produce 0·∞.
    let num = a.exp() * -(b - a).exp_m1();
    let den = -b.exp_m1();
    if den <= 0.0 {
        // π·M is negligible: a single tied word, so F itself.
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

#[derive(Debug, Clone)]
struct Level {
    d0: f64,
    ln_p: f64,
    /// `(d1, ln p)` ascending in `d1`.
    entries: Vec<(f64, f64)>,
}

/// Distribution of `(d0, d1)` totals of one codeword against a source word,
/// grouped into `d0` levels.
#[derive(Debug, Clone)]
pub(crate) struct TypeLevels {
    levels: Vec<Level>,
    ln_lower: Vec<f64>,
    ln_upper: Vec<f64>,
}

impl TypeLevels {
    pub(crate) fn new(rows: &[usize], law: TypeLaw<'_>, d0: &DistortionMatrix, d1: &DistortionMatrix) -> Result<Self> {
        let mut raw: Vec<(f64, f64, f64)> = Vec::new();
        for_each_type(rows, law, |c, ln_p| raw.push((total(c, d0), total(c, d1), ln_p)))?;
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut levels: Vec<Level> = Vec::new();
        for (a, b, lp) in raw {
            match levels.last_mut() {
                Some(l) if is_tie(a, l.d0) => {
                    l.ln_p = log_add(l.ln_p, lp);
                    match l.entries.last_mut() {
                        Some(e) if is_tie(b, e.0) => e.1 = log_add(e.1, lp),
                        _ => l.entries.push((b, lp)),
                    }
                }
                _ => levels.push(Level {
                    d0: a,
                    ln_p: lp,
                    entries: vec![(b, lp)],
                }),
            }
        }
        // Entries within a level were pushed in d1 order, but merging by
        // tolerance can leave near-equal neighbours unsorted.
        for l in &mut levels {
            l.entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let k = levels.len();
        let mut ln_lower = vec![f64::NEG_INFINITY; k];
        let mut ln_upper = vec![f64::NEG_INFINITY; k];
        let mut acc = f64::NEG_INFINITY;
        for i in 0..k {
            acc = log_add(acc, levels[i].ln_p);
            ln_lower[i] = acc;
        }
        acc = f64::NEG_INFINITY;
        for i in (0..k).rev() {
            ln_upper[i] = acc;
            acc = log_add(acc, levels[i].ln_p);
        }
        if levels.is_empty() {
            return Err(usage("no joint type is reachable from this source word"));
        }
        Ok(TypeLevels {
            levels,
            ln_lower,
            ln_upper,
        })
    }

    /// `M · ln P(d0 > v_k)`.
    fn m_ln_surv(&self, k: usize, ln_m: f64) -> f64 {
        if self.ln_lower[k] < -std::f64::consts::LN_2 {
            m_log1m(ln_m, self.ln_lower[k])
        } else if self.ln_upper[k] == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            -(ln_m + (-self.ln_upper[k]).ln()).exp()
        }
    }

    /// `ln P(d0 ≥ v_k)`.
    fn ln_at_least(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else if self.ln_lower[k - 1] < -std::f64::consts::LN_2 {
            (-self.ln_lower[k - 1].exp()).ln_1p()
        } else {
            self.ln_upper[k - 1]
        }
    }

    /// Draws the encoder's `(d0, d1)` totals and the expected tie count for
    /// a book of `exp(ln_m)` independent codewords.
    pub(crate) fn sample(&self, ln_m: f64, tie: TieRule, rng: &mut impl Rng) -> (f64, f64, f64) {
        let u: f64 = rng.random();
        let last = self.levels.len() - 1;
        let k = (0..last)
            .find(|&k| -self.m_ln_surv(k, ln_m).exp_m1() >= u)
            .unwrap_or(last);
        let level = &self.levels[k];
        let ln_pi = (level.ln_p - self.ln_at_least(k)).min(0.0);
        let b = m_log1m(ln_m, ln_pi);
        let ln_mpi = ln_m + ln_pi;
        let ties = if ln_mpi < -600.0 {
            1.0
        } else {
            let den = -b.exp_m1();
            if den > 0.0 { (ln_mpi.exp() / den).max(1.0) } else { 1.0 }
        };
        let v: f64 = rng.random();
        let d1 = match tie {
            TieRule::Uniform | TieRule::FirstIndex => {
                let mut acc = 0.0;
                let mut pick = level.entries.last().map_or(0.0, |e| e.0);
                for e in &level.entries {
                    acc += (e.1 - level.ln_p).exp();
                    if v < acc {
                        pick = e.0;
                        break;
                    }
                }
                pick
            }
            TieRule::Pessimistic => {
                let mut tail = f64::NEG_INFINITY;
                let mut tails = vec![f64::NEG_INFINITY; level.entries.len()];
                for j in (0..level.entries.len()).rev() {
                    tails[j] = tail;
                    tail = log_add(tail, level.entries[j].1);
                }
                let mut pick = level.entries.last().map_or(0.0, |e| e.0);
                for (j, e) in level.entries.iter().enumerate() {
                    let a = m_log1m(ln_m, ln_pi + tails[j] - level.ln_p);
                    if max_cdf(a, b) >= v {
                        pick = e.0;
                        break;
                    }
                }
                pick
            }
        };
        (level.d0, d1, ties)
    }
}

/// Mutual information of a joint type in bits.
pub(crate) fn type_info_bits(counts: &[usize], rows: &[usize], cols: &[usize]) -> f64 {
    let ny = cols.len();
    let n: usize = rows.iter().sum();
    let n = n as f64;
    let mut i = 0.0;
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let c = c as f64;
            i += c / n * (c * n / (rows[j / ny] as f64 * cols[j % ny] as f64)).log2();
        }
    }
    i
}

/// Joint types realised by the words of a book against `x`.
pub fn realized_types(x: &[u16], book: &Codebook, source_size: usize) -> HashSet<Vec<usize>> {
    let mut counts = vec![0; source_size * book.alphabet];
    book.words()
        .map(|w| {
            joint_counts(x, w, book.alphabet, &mut counts);
            counts.clone()
        })
        .collect()
}

/// Coverage of the lower type set and violations of the upper one for one
/// source word.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrialCoverage {
    /// Joint types with `I ≤ R - δ`.
    pub lower_types: usize,
    /// Lower-set types realised by at least one codeword.
    pub covered: usize,
    /// Realised types with `I > R + δ`.
    pub violations: usize,
    /// Whether the codebook was drawn explicitly.
    pub explicit: bool,
}

impl TrialCoverage {
    pub fn fraction(&self) -> f64 {
        if self.lower_types == 0 {
            1.0
        } else {
            self.covered as f64 / self.lower_types as f64
        }
    }
}

/// Classifies joint types for a constant-composition book over `q` at rate
/// `rate_bits`. With `book`, realisation is read off the codewords; without,
/// each type is realised independently with its exact probability
/// `1 - (1 - P(t))^M`.
pub(crate) fn trial_coverage(
    x: &[u16],
    source_size: usize,
    q: &Pmf,
    rate_bits: f64,
    delta: f64,
    ln_m: f64,
    book: Option<&Codebook>,
    rng: &mut impl Rng,
) -> Result<TrialCoverage> {
    let n = x.len();
    let cols = composition(q, n)?;
    let rows = word_counts(x, source_size);
    let realized = book.map(|b| realized_types(x, b, source_size));
    let mut out = TrialCoverage {
        lower_types: 0,
        covered: 0,
        violations: 0,
        explicit: book.is_some(),
    };
    for_each_type(&rows, TypeLaw::Cc(&cols), |c, ln_p| {
        let info = type_info_bits(c, &rows, &cols);
        let lower = info <= rate_bits - delta;
        let upper_violation = info > rate_bits + delta;
        if !lower && !upper_violation {
            return;
        }
        let hit = match &realized {
            Some(set) => set.contains(c),
            None => {
                let p = -m_log1m(ln_m, ln_p).exp_m1();
                rng.random::<f64>() < p
            }
        };
        if lower {
            out.lower_types += 1;
            out.covered += usize::from(hit);
        }
        if upper_violation && hit {
            out.violations += 1;
        }
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cc_type_probabilities_sum_to_one() {
        let mut s = f64::NEG_INFINITY;
        let n = for_each_type(&[3, 4], TypeLaw::Cc(&[2, 5]), |_, lp| s = log_add(s, lp)).unwrap();
        assert_eq!(n, 3);
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn iid_type_probabilities_sum_to_one() {
        let mut s = f64::NEG_INFINITY;
        for_each_type(&[5, 2, 3], TypeLaw::Iid(&[0.2, 0.3, 0.5]), |_, lp| s = log_add(s, lp)).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn max_cdf_limits() {
        // One codeword: the maximum is the single draw.
        let ln_m = 0.0;
        let ln_pi = 0.0f64;
        let b = m_log1m(ln_m, ln_pi);
        let a = m_log1m(ln_m, (0.3f64).ln());
        assert!((max_cdf(a, b) - 0.7).abs() < 1e-12);
    }
}
