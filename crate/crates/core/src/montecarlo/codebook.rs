use super::{codebook_size, ln_codebook_size};
use crate::ensembles::EnsembleSpec;
use crate::error::{usage, MrdError, Result};
use crate::prob::{Axis, Pmf};
use crate::units::Rate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Reconstruction words of one random codebook, stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    /// Reconstruction alphabet size.
    pub alphabet: usize,
    symbols: Vec<u16>,
    /// Number of words drawn before expurgation.
    pub drawn: usize,
}

impl Codebook {
    pub fn from_words(words: &[Vec<u16>], alphabet: usize) -> Result<Self> {
        let n = words.first().map_or(0, Vec::len);
        if n == 0 || words.iter().any(|w| w.len() != n) {
            return Err(usage("codebook words must be non-empty and of equal length"));
        }
        if words.iter().flatten().any(|&s| s as usize >= alphabet) {
            return Err(usage("codeword symbol outside the reconstruction alphabet"));
        }
        Ok(Codebook {
            n,
            alphabet,
            symbols: words.concat(),
            drawn: words.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn word(&self, i: usize) -> &[u16] {
        &self.symbols[i * self.n..(i + 1) * self.n]
    }

    pub fn words(&self) -> impl Iterator<Item = &[u16]> {
        self.symbols.chunks(self.n)
    }

    /// `log2(len) / n`, the rate actually carried by the book.
    pub fn effective_rate_bits(&self) -> f64 {
        (self.len() as f64).log2() / self.n as f64
    }
}

/// Largest-remainder rounding of `n·q`; ties go to the lower symbol.
pub fn rounded_type(q: &[f64], n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = q.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (scaled[a] - counts[a] as f64, scaled[b] - counts[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn realizable(q: &[f64], n: usize) -> bool {
    rounded_type(q, n).iter().zip(q).all(|(&c, &p)| p <= 0.0 || c > 0)
}

/// Rounded composition, rejecting block lengths at which a symbol of
/// positive probability would vanish.
pub fn composition(q: &Pmf, n: usize) -> Result<Vec<usize>> {
    let p = q.probs();
    if realizable(p, n) {
        return Ok(rounded_type(p, n));
    }
    let smallest = (n + 1..).find(|&m| (m..m + 64).all(|k| realizable(p, k))).unwrap_or(n + 1);
    Err(usage(format!(
        "composition of {:?} is not realizable at n = {n}; use n >= {smallest}",
        p
    )))
}

fn cc_word(counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<u16> {
    let mut w: Vec<u16> = counts
        .iter()
        .enumerate()
        .flat_map(|(s, &c)| std::iter::repeat_n(s as u16, c))
        .collect();
    w.shuffle(rng);
    w
}

fn iid_word(q: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<u16> {
    (0..n).map(|_| sample_symbol(q, rng)).collect()
}

pub(crate) fn sample_symbol(p: &[f64], rng: &mut impl Rng) -> u16 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i as u16;
        }
    }
    // Rounding left a sliver above the last cumulative value.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0) as u16
}

/// Largest `|T(a,b) - q1(a)q2(b)|` over the joint type of a word pair.
pub fn pair_deviation(w1: &[u16], w2: &[u16], q1: &[f64], q2: &[f64]) -> f64 {
    let (k1, k2) = (q1.len(), q2.len());
    let mut counts = vec![0usize; k1 * k2];
    for (&a, &b) in w1.iter().zip(w2) {
        counts[a as usize * k2 + b as usize] += 1;
    }
    let n = w1.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(j, &c)| (c as f64 / n - q1[j / k2] * q2[j % k2]).abs())
        .fold(0.0, f64::max)
}

/// Whether expurgation keeps a pair.
pub fn keeps_pair(w1: &[u16], w2: &[u16], q1: &[f64], q2: &[f64], delta: f64) -> bool {
    pair_deviation(w1, w2, q1, q2) <= delta
}

/// Codeword count and length check against the memory budget (bytes).
pub(crate) fn check_memory(words: f64, n: usize, budget: usize) -> Result<()> {
    let bytes = words * n as f64 * std::mem::size_of::<u16>() as f64;
    if bytes > budget as f64 {
        return Err(MrdError::Memory(format!(
            "codebook of {words:.3e} words of length {n} needs {bytes:.3e} bytes, budget is {budget}"
        )));
    }
    Ok(())
}

/// Number of words an explicit book for `spec` would hold before
/// expurgation, as a float since it may be astronomically large.
pub fn explicit_words(spec: &EnsembleSpec, n: usize, rate: Rate) -> f64 {
    match spec {
        EnsembleSpec::Cc { .. } | EnsembleSpec::Iid { .. } => ln_codebook_size(n, rate).exp(),
        EnsembleSpec::Superposition { r0, r1, .. } => (ln_codebook_size(n, *r0) + ln_codebook_size(n, *r1)).exp(),
        EnsembleSpec::ExpurgatedParallel { r1, r2, .. } => {
            // Both component books are stored alongside the kept pairs.
            (ln_codebook_size(n, *r1) + ln_codebook_size(n, *r2)).exp()
                + ln_codebook_size(n, *r1).exp()
                + ln_codebook_size(n, *r2).exp()
        }
    }
}

/// Draws a codebook from a fresh generator seeded with `seed`.
///
/// `rate` sets the size of single-rate books; split ensembles take their
/// component rates from `spec`. `delta` is the expurgation threshold.
pub fn draw_codebook(spec: &EnsembleSpec, n: usize, rate: Rate, delta: f64, seed: u64) -> Result<Codebook> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_with(spec, n, rate, delta, usize::MAX, &mut rng)
}

pub(crate) fn draw_with(
    spec: &EnsembleSpec,
    n: usize,
    rate: Rate,
    delta: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Codebook> {
    if n == 0 {
        return Err(usage("block length must be at least 1"));
    }
    check_memory(explicit_words(spec, n, rate), n, budget)?;
    match spec {
        EnsembleSpec::Cc { q } => {
            let counts = composition(q, n)?;
            let m = codebook_size(n, rate);
            let words: Vec<Vec<u16>> = (0..m).map(|_| cc_word(&counts, rng)).collect();
            Codebook::from_words(&words, q.alphabet_size())
        }
        EnsembleSpec::Iid { q } => {
            let m = codebook_size(n, rate);
            let words: Vec<Vec<u16>> = (0..m).map(|_| iid_word(q.probs(), n, rng)).collect();
            Codebook::from_words(&words, q.alphabet_size())
        }
        EnsembleSpec::Superposition { q_uxhat, r0, r1 } => {
            if q_uxhat.axes() != [Axis::U, Axis::Xhat] {
                return Err(usage("superposition law must have axes (U, Xhat)"));
            }
            let rows = q_uxhat.grouped(&[Axis::U], &[Axis::Xhat])?;
            let q_u = Pmf::new(q_uxhat.marginal(Axis::U)?)?;
            let alphabet = q_uxhat.shape()[1];
            let counts_u = composition(&q_u, n)?;
            // Satellite compositions given each cloud symbol.
            let sat_counts: Vec<Vec<usize>> = rows
                .iter()
                .zip(q_u.probs())
                .zip(&counts_u)
                .map(|((row, &pu), &nu)| {
                    if pu <= 0.0 {
                        return vec![0; alphabet];
                    }
                    let cond: Vec<f64> = row.iter().map(|v| v / pu).collect();
                    rounded_type(&cond, nu)
                })
                .collect();
            let (m0, m1) = (codebook_size(n, *r0), codebook_size(n, *r1));
            let mut words = Vec::with_capacity(m0 * m1);
            for _ in 0..m0 {
                let cloud = cc_word(&counts_u, rng);
                let positions: Vec<Vec<usize>> = (0..counts_u.len())
                    .map(|u| (0..n).filter(|&i| cloud[i] as usize == u).collect())
                    .collect();
                for _ in 0..m1 {
                    let mut w = vec![0u16; n];
                    for (u, pos) in positions.iter().enumerate() {
                        let part = cc_word(&sat_counts[u], rng);
                        for (&i, s) in pos.iter().zip(part) {
                            w[i] = s;
                        }
                    }
                    words.push(w);
                }
            }
            Codebook::from_words(&words, alphabet)
        }
        EnsembleSpec::ExpurgatedParallel { q1, q2, psi, r1, r2 } => {
            let (c1, c2) = (composition(q1, n)?, composition(q2, n)?);
            let (m1, m2) = (codebook_size(n, *r1), codebook_size(n, *r2));
            let b1: Vec<Vec<u16>> = (0..m1).map(|_| cc_word(&c1, rng)).collect();
            let b2: Vec<Vec<u16>> = (0..m2).map(|_| cc_word(&c2, rng)).collect();
            let mut words = Vec::new();
            for w1 in &b1 {
                for w2 in &b2 {
                    if keeps_pair(w1, w2, q1.probs(), q2.probs(), delta) {
                        words.push(w1.iter().zip(w2).map(|(&a, &b)| psi.apply(a as usize, b as usize) as u16).collect());
                    }
                }
            }
            if words.is_empty() {
                return Err(usage(format!(
                    "expurgation with delta = {delta} removed every pair at n = {n}; increase n or delta"
                )));
            }
            let mut book = Codebook::from_words(&words, psi.output_size)?;
            book.drawn = m1 * m2;
            Ok(book)
        }
    }
}
