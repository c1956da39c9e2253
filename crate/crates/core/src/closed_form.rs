//! Closed-form references for the worked examples: the binary tie-breaking
//! example, the parallel binary source, the ternary superposition example and
//! the Gaussian source with a sign-only true distortion.
//!
//! All rates here are in bits.

use crate::ensembles::{CurvePoint, EnsembleKind, TieRule};
use crate::error::{domain, MrdError, Result};
use crate::prob::h2_bits;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

const BISECT_ITERS: usize = 200;

/// Lower root of `H2(a) = h` on `[0, 1/2]`, with `h` in bits.
pub fn h2_inverse_lower(h: f64) -> Result<f64> {
    if !(-1e-15..=1.0 + 1e-15).contains(&h) {
        return Err(domain(format!("binary entropy value {h} is outside [0, 1]")));
    }
    let h = h.clamp(0.0, 1.0);
    if h == 0.0 {
        return Ok(0.0);
    }
    if h == 1.0 {
        return Ok(0.5);
    }
    Ok(bisect(0.0, 0.5, |a| h2_bits(a) - h))
}

/// Bisection for an increasing function with a sign change on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_rate(r: f64, max: f64) -> Result<()> {
    if r.is_finite() && (0.0..=max).contains(&r) {
        Ok(())
    } else {
        Err(domain(format!("rate {r} bits is outside [0, {max}]")))
    }
}

/// Ensembles covered by the binary example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryEnsemble {
    Matched,
    Cc,
    Iid,
}

/// Uniform binary source, one-sided `d0` (only `x = 0, x̂ = 1` costs) and
/// Hamming `d1`.
///
/// Constant-composition coding coincides with matched coding here. Under
/// i.i.d. coding the tie set stops being a singleton above half a bit, and
/// the result depends on the tie rule: the pessimistic rule takes the
/// worst tied codeword while uniform and first-index selection both land on
/// 1/4 (index order carries no information about the codeword).
pub fn binary_curve(r: f64, ensemble: BinaryEnsemble, tie: TieRule) -> Result<f64> {
    check_rate(r, 1.0)?;
    match ensemble {
        BinaryEnsemble::Matched | BinaryEnsemble::Cc => h2_inverse_lower(1.0 - r),
        BinaryEnsemble::Iid if r <= 0.5 => Ok(h2_inverse_lower(1.0 - 2.0 * r)? / 2.0 + 0.25),
        BinaryEnsemble::Iid => match tie {
            TieRule::Pessimistic => Ok((1.0 - h2_inverse_lower(2.0 - 2.0 * r)?) / 2.0),
            TieRule::Uniform | TieRule::FirstIndex => Ok(0.25),
        },
    }
}

/// Ensembles covered by the parallel binary example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelEnsemble {
    Independent,
    Expurgated,
    Matched,
}

/// Two uniform bits encoded under `d0 = w·[x1≠x̂1] + (1−w)·[x2≠x̂2]` and judged
/// by the average Hamming distortion.
pub fn parallel_curve(r: f64, weight: f64, ensemble: ParallelEnsemble) -> Result<f64> {
    check_rate(r, 2.0)?;
    match ensemble {
        ParallelEnsemble::Independent => {
            let (a, b) = parallel_independent(r, weight)?;
            Ok(0.5 * (a + b))
        }
        ParallelEnsemble::Expurgated | ParallelEnsemble::Matched => h2_inverse_lower(1.0 - r / 2.0),
    }
}

/// Per-bit flip fractions `(δ1, δ2)` chosen by independent constant-composition
/// codewords: minimise `w·δ1 + (1−w)·δ2` subject to a total rate of `r`.
///
/// The budget constraint is active at the optimum, so the search runs over how
/// the rate is split. Each `δ` is convex and decreasing in its share, making
/// the objective convex in the split; a coarse grid brackets the minimum and
/// golden-section search polishes it.
pub fn parallel_independent(r: f64, weight: f64) -> Result<(f64, f64)> {
    check_rate(r, 2.0)?;
    if !(weight > 0.0 && weight < 1.0) {
        return Err(domain(format!("weight {weight} is outside (0, 1)")));
    }
    let lo = (r - 1.0).max(0.0);
    let hi = r.min(1.0);
    let deltas = |s: f64| -> (f64, f64) {
        let a = h2_inverse_lower((1.0 - s).clamp(0.0, 1.0)).unwrap_or(0.0);
        let b = h2_inverse_lower((1.0 - (r - s)).clamp(0.0, 1.0)).unwrap_or(0.0);
        (a, b)
    };
    let objective = |s: f64| {
        let (a, b) = deltas(s);
        weight * a + (1.0 - weight) * b
    };
    if hi - lo < 1e-15 {
        return Ok(deltas(lo));
    }
    const GRID: usize = 200;
    let step = (hi - lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .unwrap_or(lo);
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..BISECT_ITERS {
        if b - a < 1e-15 {
            break;
        }
        if objective(c) < objective(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    Ok(deltas(0.5 * (a + b)))
}

/// The symmetric matched optimum of the ternary example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TernaryPoint {
    pub p01: f64,
    pub p02: f64,
    /// `I(X; X̂)` in bits.
    pub rate_bits: f64,
    /// `I(X; U)` in bits; the cloud rate that makes superposition coding matched.
    pub r0_bits: f64,
    pub d1: f64,
}

fn h3_bits(a: f64, b: f64) -> f64 {
    let c = (1.0 - a - b).max(0.0);
    -[a, b, c].iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>() / LN_2
}

/// `I(X; X̂)` in bits of the symmetric joint with off-diagonal masses `p01, p02`.
pub fn ternary_mi(p01: f64, p02: f64) -> Result<f64> {
    if p01 < 0.0 || p02 < 0.0 || p01 + p02 > 1.0 / 3.0 + 1e-15 || p02 > 1.0 / 6.0 + 1e-15 {
        return Err(domain(format!("(p01, p02) = ({p01}, {p02}) is not admissible")));
    }
    Ok(3f64.log2() - (2.0 * h3_bits(3.0 * p01, 3.0 * p02) + h3_bits(3.0 * p02, 3.0 * p02)) / 3.0)
}

/// `I(X; U)` in bits for the ternary cloud with `U = [X̂ = 2]`.
pub fn ternary_iu(p02: f64) -> Result<f64> {
    if !(0.0..=1.0 / 6.0 + 1e-15).contains(&p02) {
        return Err(domain(format!("p02 = {p02} is outside [0, 1/6]")));
    }
    let p02 = p02.min(1.0 / 6.0);
    Ok((3f64.log2() - 2.0 / 3.0 - (2.0 * h2_bits(3.0 * p02) + h2_bits(6.0 * p02)) / 3.0).max(0.0))
}

/// Matched optimum for the ternary source at rate `r` bits.
///
/// Along the optimal curve `p01 = p02² / (1/3 − 2 p02)`, and the rate falls
/// from `log2 3` at `p02 = 0` to zero at `p02 = 1/9`.
pub fn ternary_matched(r: f64) -> Result<TernaryPoint> {
    let top = 3f64.log2();
    if !(r > 0.0 && r < top) {
        return Err(domain(format!("rate {r} bits is outside (0, log2 3)")));
    }
    let p01_of = |p02: f64| p02 * p02 / (1.0 / 3.0 - 2.0 * p02);
    let mi = |p02: f64| ternary_mi(p01_of(p02), p02).unwrap_or(f64::NAN);
    let ninth = 1.0 / 9.0;
    if mi(0.0) < r || mi(ninth) > r {
        return Err(MrdError::Convergence {
            context: "ternary matched rate is not bracketed on [0, 1/9]".into(),
            iterations: 0,
            residual: mi(ninth) - r,
        });
    }
    // mi is decreasing in p02.
    let p02 = bisect(0.0, ninth, |p| r - mi(p));
    let p01 = p01_of(p02);
    Ok(TernaryPoint {
        p01,
        p02,
        rate_bits: mi(p02),
        r0_bits: ternary_iu(p02)?,
        d1: 2.0 * (p01 + p02),
    })
}

/// Symmetric-channel cross probability `δ` of independent constant-composition
/// codewords for the ternary source: `log2 3 − H2(δ) − δ = r`. The true
/// distortion is `2δ/3`.
pub fn ternary_cc(r: f64) -> Result<f64> {
    let top = 3f64.log2();
    check_rate(r, top)?;
    let mi = |d: f64| top - h2_bits(d) - d;
    Ok(2.0 * bisect(0.0, 2.0 / 3.0, |d| r - mi(d)) / 3.0)
}

/// Probability that a zero-mean bivariate normal with correlation `rho`
/// falls in the second or fourth quadrant.
pub fn sign_disagreement(rho: f64) -> f64 {
    0.5 - rho.clamp(-1.0, 1.0).asin() / PI
}

/// `R(D0)` in nats for Gaussian `X ~ N(0, σ²)`, i.i.d. `X̂ ~ N(0, τ²)` and
/// squared error.
pub fn r_gaussian(d0: f64, sigma2: f64, tau2: f64) -> Result<f64> {
    check_variances(sigma2, tau2)?;
    if !(d0 > 0.0 && d0 <= sigma2 + tau2) {
        return Err(domain(format!("D0 = {d0} is outside (0, {}]", sigma2 + tau2)));
    }
    let v = 0.5 * (tau2 + (tau2 * tau2 + 4.0 * d0 * sigma2).sqrt());
    Ok((0.5 * (v / d0).ln() - (v - d0) * (v - sigma2) / (2.0 * v * tau2)).max(0.0))
}

/// Inverse of [`r_gaussian`]: the `D0` reached at `rate` nats.
pub fn r_gaussian_inverse(rate: f64, sigma2: f64, tau2: f64) -> Result<f64> {
    check_variances(sigma2, tau2)?;
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(domain(format!("rate {rate} nats must be finite and non-negative")));
    }
    let top = sigma2 + tau2;
    if rate == 0.0 {
        return Ok(top);
    }
    let f = |d: f64| r_gaussian(d, sigma2, tau2).unwrap_or(f64::INFINITY);
    // f is decreasing; the bracket follows the bisection contract.
    let (mut lo, mut hi) = (1e-12, top - 1e-12);
    if f(lo) < rate {
        return Err(domain(format!("rate {rate} nats needs D0 below 1e-12")));
    }
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_variances(sigma2: f64, tau2: f64) -> Result<()> {
    if sigma2 > 0.0 && tau2 > 0.0 && sigma2.is_finite() && tau2.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("variances must be positive, got σ² = {sigma2}, τ² = {tau2}")))
    }
}

/// Bivariate normal parameters and distortions at one point of the Gaussian
/// sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoint {
    pub lambda: f64,
    pub var_x: f64,
    pub var_xhat: f64,
    pub rho: f64,
    pub d0: f64,
    /// Sign-disagreement probability.
    pub d1: f64,
    /// Rate in nats, from `D0`.
    pub rate_nats: f64,
}

/// One point of the closed-form Gaussian recipe. The exponent coefficients are
/// `a = 1/(2σ²) − λ`, `b = 1/(2τ²) − λ`, `c = 2λ`; variances and correlation
/// follow the stated parameter formulas verbatim. See [`crate::dual`] for the
/// exactly normalised tilt.
pub fn gaussian_point(lambda: f64, sigma2: f64, tau2: f64) -> Result<GaussianPoint> {
    check_variances(sigma2, tau2)?;
    if !(lambda < 0.0 && lambda.is_finite()) {
        return Err(domain(format!("λ = {lambda} must be negative")));
    }
    let a = 1.0 / (2.0 * sigma2) - lambda;
    let b = 1.0 / (2.0 * tau2) - lambda;
    let c = 2.0 * lambda;
    let det = 4.0 * a * b - c * c;
    let var_x = (2.0 * b / det).sqrt();
    let var_xhat = (2.0 * a / det).sqrt();
    let rho = -c / (2.0 * (a * b).sqrt());
    let d0 = var_x + var_xhat - 2.0 * rho * (var_x * var_xhat).sqrt();
    let rate_nats = r_gaussian(d0.min(sigma2 + tau2), sigma2, tau2)?;
    Ok(GaussianPoint {
        lambda,
        var_x,
        var_xhat,
        rho,
        d0,
        d1: sign_disagreement(rho),
        rate_nats,
    })
}

/// The recipe point whose sign-disagreement equals `d1`, found by bisection
/// on `λ` (the disagreement increases with `λ`).
pub fn gaussian_point_at_d1(d1: f64, sigma2: f64, tau2: f64) -> Result<GaussianPoint> {
    if !(d1 > 0.0 && d1 < 0.5) {
        return Err(domain(format!("d1 = {d1} is outside (0, 1/2)")));
    }
    let f = |l: f64| gaussian_point(l, sigma2, tau2).map(|p| p.d1);
    let mut lo = -1.0;
    while f(lo)? > d1 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(domain(format!("d1 = {d1} needs λ below -1e12")));
        }
    }
    let (mut lo, mut hi) = (lo, 0.0);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < d1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    gaussian_point(0.5 * (lo + hi), sigma2, tau2)
}

/// Sweep the recipe over a grid of negative `λ`, one i.i.d. curve point each.
pub fn gaussian_curve(lambdas: &[f64], sigma2: f64, tau2: f64) -> Result<Vec<CurvePoint>> {
    lambdas
        .iter()
        .map(|&l| {
            let p = gaussian_point(l, sigma2, tau2)?;
            Ok(CurvePoint {
                rate_bits: p.rate_nats / LN_2,
                d0: p.d0,
                d1: p.d1,
                d1_min: p.d1,
                d1_max: p.d1,
                ensemble: EnsembleKind::Iid,
                tie_rule: TieRule::FirstIndex,
            })
        })
        .collect()
}

/// Matched rate in bits for the sign distortion: the problem reduces to an
/// equiprobable binary source.
pub fn gaussian_matched_rate(d1: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&d1) {
        return Err(domain(format!("d1 = {d1} is outside [0, 1/2]")));
    }
    Ok(1.0 - h2_bits(d1))
}
