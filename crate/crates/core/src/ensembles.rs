//! Achievable `d1` for the four discrete random-coding ensembles.
//!
//! Every calculator runs the same two stages: minimise `E[d0]` over the
//! ensemble's feasible set, then take the largest `E[d1]` over the
//! minimisers (pessimistic tie-breaking).

use crate::error::{usage, Result};
use crate::prob::{Axis, DistortionMatrix, JointPmf, Pmf, Psi};
use crate::solvers::{max_d1_over_ties, min_d0_multi, ConstraintSet, DEFAULT_EPS_TIE};
use crate::units::Rate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest number of auxiliary distributions `optimize_q_grid` will visit.
pub const MAX_GRID_POINTS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Cc,
    Iid,
    Superposition,
    ExpurgatedParallel,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Cc => "cc",
            EnsembleKind::Iid => "iid",
            EnsembleKind::Superposition => "superposition",
            EnsembleKind::ExpurgatedParallel => "expurgated",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the encoder picks among codewords tied at the minimum `d0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// The tied codeword with the largest `d1`.
    #[default]
    Pessimistic,
    /// A tied codeword drawn uniformly at random.
    Uniform,
    /// The tied codeword with the smallest index.
    FirstIndex,
}

impl TieRule {
    pub fn as_str(self) -> &'static str {
        match self {
            TieRule::Pessimistic => "pessimistic",
            TieRule::Uniform => "uniform",
            TieRule::FirstIndex => "first_index",
        }
    }
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TieRule {
    type Err = crate::error::MrdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" => Ok(TieRule::Pessimistic),
            "uniform" => Ok(TieRule::Uniform),
            "first_index" | "first" => Ok(TieRule::FirstIndex),
            other => Err(usage(format!("unknown tie rule '{other}'"))),
        }
    }
}

/// One ensemble with its auxiliary laws and rate split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    Cc {
        q: Pmf,
    },
    Iid {
        q: Pmf,
    },
    Superposition {
        q_uxhat: JointPmf,
        r0: Rate,
        r1: Rate,
    },
    ExpurgatedParallel {
        q1: Pmf,
        q2: Pmf,
        psi: Psi,
        r1: Rate,
        r2: Rate,
    },
}

impl EnsembleSpec {
    pub fn kind(&self) -> EnsembleKind {
        match self {
            EnsembleSpec::Cc { .. } => EnsembleKind::Cc,
            EnsembleSpec::Iid { .. } => EnsembleKind::Iid,
            EnsembleSpec::Superposition { .. } => EnsembleKind::Superposition,
            EnsembleSpec::ExpurgatedParallel { .. } => EnsembleKind::ExpurgatedParallel,
        }
    }

    /// Total rate for split ensembles; `None` for single-rate ones.
    pub fn split_total(&self) -> Option<Rate> {
        match self {
            EnsembleSpec::Superposition { r0, r1, .. } => Some(*r0 + *r1),
            EnsembleSpec::ExpurgatedParallel { r1, r2, .. } => Some(*r1 + *r2),
            _ => None,
        }
    }

    /// Same auxiliaries with the first split component set to `first` and
    /// the second to `total - first`. Single-rate specs are returned as is.
    pub fn with_split(&self, first: Rate, total: Rate) -> EnsembleSpec {
        let second = Rate::nats((total.in_nats() - first.in_nats()).max(0.0));
        let mut s = self.clone();
        match &mut s {
            EnsembleSpec::Superposition { r0, r1, .. } => {
                *r0 = first;
                *r1 = second;
            }
            EnsembleSpec::ExpurgatedParallel { r1, r2, .. } => {
                *r1 = first;
                *r2 = second;
            }
            _ => {}
        }
        s
    }

    fn constraints(&self, px: &Pmf, rate: Rate) -> ConstraintSet {
        match self {
            EnsembleSpec::Cc { q } => ConstraintSet::cc(px.clone(), q.clone(), rate),
            EnsembleSpec::Iid { q } => ConstraintSet::iid(px.clone(), q.clone(), rate),
            EnsembleSpec::Superposition { q_uxhat, r0, r1 } => {
                ConstraintSet::superposition(px.clone(), q_uxhat.clone(), *r0, *r1)
            }
            EnsembleSpec::ExpurgatedParallel { q1, q2, r1, r2, .. } => {
                ConstraintSet::expurgated(px.clone(), q1.clone(), q2.clone(), *r1, *r2)
            }
        }
    }

    fn psi(&self) -> Option<&Psi> {
        match self {
            EnsembleSpec::ExpurgatedParallel { psi, .. } => Some(psi),
            _ => None,
        }
    }
}

/// An analytic `(R, D0, D1)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate_bits: f64,
    pub d0: f64,
    /// Pessimistic value, equal to `d1_max`.
    pub d1: f64,
    pub d1_min: f64,
    pub d1_max: f64,
    pub ensemble: EnsembleKind,
    pub tie_rule: TieRule,
}

fn two_stage(
    cs: &ConstraintSet,
    psi: Option<&Psi>,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    rate: Rate,
    ensemble: EnsembleKind,
) -> Result<CurvePoint> {
    let stage1 = min_d0_multi(cs, d0, psi)?;
    let bracket = max_d1_over_ties(cs, d0, d1, psi, stage1.d0_star, DEFAULT_EPS_TIE)?;
    Ok(CurvePoint {
        rate_bits: rate.in_bits(),
        d0: stage1.d0_star,
        d1: bracket.d1_max,
        d1_min: bracket.d1_min,
        d1_max: bracket.d1_max,
        ensemble,
        tie_rule: TieRule::Pessimistic,
    })
}

/// Evaluates `spec` at the given rate. Split ensembles use their own split
/// and ignore `rate`.
pub fn evaluate(
    spec: &EnsembleSpec,
    px: &Pmf,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    rate: Rate,
) -> Result<CurvePoint> {
    let rate = spec.split_total().unwrap_or(rate);
    two_stage(&spec.constraints(px, rate), spec.psi(), d0, d1, rate, spec.kind())
}

/// Constant-composition codebooks with composition `q`.
pub fn d1bar_cc(px: &Pmf, q: &Pmf, d0: &DistortionMatrix, d1: &DistortionMatrix, rate: Rate) -> Result<CurvePoint> {
    evaluate(&EnsembleSpec::Cc { q: q.clone() }, px, d0, d1, rate)
}

/// Codebooks with i.i.d. entries drawn from `q`.
pub fn d1bar_iid(px: &Pmf, q: &Pmf, d0: &DistortionMatrix, d1: &DistortionMatrix, rate: Rate) -> Result<CurvePoint> {
    evaluate(&EnsembleSpec::Iid { q: q.clone() }, px, d0, d1, rate)
}

/// Superposition codebooks: `r0` for cloud centres, `r1` for satellites.
pub fn d1bar_superposition(
    px: &Pmf,
    q_uxhat: &JointPmf,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    r0: Rate,
    r1: Rate,
) -> Result<CurvePoint> {
    let spec = EnsembleSpec::Superposition {
        q_uxhat: q_uxhat.clone(),
        r0,
        r1,
    };
    evaluate(&spec, px, d0, d1, r0 + r1)
}

/// Expurgated parallel codebooks combined through `psi`.
#[allow(clippy::too_many_arguments)]
pub fn d1bar_expurgated(
    px: &Pmf,
    q1: &Pmf,
    q2: &Pmf,
    psi: &Psi,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    r1: Rate,
    r2: Rate,
) -> Result<CurvePoint> {
    let spec = EnsembleSpec::ExpurgatedParallel {
        q1: q1.clone(),
        q2: q2.clone(),
        psi: psi.clone(),
        r1,
        r2,
    };
    evaluate(&spec, px, d0, d1, r1 + r2)
}

/// Best split of `total` for a superposition or expurgated template,
/// scanning the first component on a uniform grid of width `step`
/// (default `total / 20`). Ties go to the smallest first component.
pub fn best_split(
    template: &EnsembleSpec,
    px: &Pmf,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    total: Rate,
    step: Option<Rate>,
) -> Result<(CurvePoint, EnsembleSpec)> {
    if template.split_total().is_none() {
        return Err(usage("rate splits apply to superposition and expurgated ensembles"));
    }
    let step = step.map_or(total.in_nats() / 20.0, Rate::in_nats);
    if total.in_nats() <= 0.0 {
        let spec = template.with_split(Rate::ZERO, total);
        return Ok((evaluate(&spec, px, d0, d1, total)?, spec));
    }
    if !(step > 0.0) {
        return Err(usage("split step must be positive"));
    }
    let count = (total.in_nats() / step + 1e-9).floor() as usize;
    let mut firsts: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if total.in_nats() - firsts[count] > 1e-12 {
        firsts.push(total.in_nats());
    }
    let points: Vec<(CurvePoint, EnsembleSpec)> = firsts
        .par_iter()
        .map(|&f| {
            let spec = template.with_split(Rate::nats(f.min(total.in_nats())), total);
            evaluate(&spec, px, d0, d1, total).map(|p| (p, spec))
        })
        .collect::<Result<_>>()?;
    Ok(pick_best(points))
}

fn pick_best(points: Vec<(CurvePoint, EnsembleSpec)>) -> (CurvePoint, EnsembleSpec) {
    // Strict improvement only, so the earliest candidate wins ties.
    points
        .into_iter()
        .reduce(|best, next| if next.0.d1 < best.0.d1 { next } else { best })
        .expect("at least one candidate")
}

/// Number of points `{k / res}` on the probability simplex of dimension
/// `parts`, as a float so huge grids do not overflow.
fn simplex_count(parts: usize, res: usize) -> f64 {
    // binom(res + parts - 1, parts - 1)
    (1..parts).fold(1.0, |acc, i| acc * (res + i) as f64 / i as f64)
}

fn simplex_grid(parts: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(parts - 1, left - c, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, res, res, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive sweep of the template's auxiliary law(s) over the simplex
/// grid with spacing `1 / resolution`, keeping rates and `psi` fixed.
/// Returns the smallest pessimistic `d1` found. Heuristic only.
pub fn optimize_q_grid(
    template: &EnsembleSpec,
    px: &Pmf,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    rate: Rate,
    resolution: usize,
) -> Result<(CurvePoint, EnsembleSpec)> {
    if resolution < 2 {
        return Err(usage("grid resolution must be at least 2"));
    }
    let specs: Vec<EnsembleSpec> = match template {
        EnsembleSpec::Cc { q } | EnsembleSpec::Iid { q } => {
            let n = q.alphabet_size();
            guard(simplex_count(n, resolution))?;
            simplex_grid(n, resolution)
                .into_iter()
                .map(|w| {
                    let q = Pmf::new(w)?;
                    Ok(match template {
                        EnsembleSpec::Cc { .. } => EnsembleSpec::Cc { q },
                        _ => EnsembleSpec::Iid { q },
                    })
                })
                .collect::<Result<_>>()?
        }
        EnsembleSpec::Superposition { q_uxhat, r0, r1 } => {
            let shape = q_uxhat.shape().to_vec();
            guard(simplex_count(shape[0] * shape[1], resolution))?;
            simplex_grid(shape[0] * shape[1], resolution)
                .into_iter()
                .map(|w| {
                    let q_uxhat = JointPmf::from_flat(vec![Axis::U, Axis::Xhat], shape.clone(), w)?;
                    Ok(EnsembleSpec::Superposition { q_uxhat, r0: *r0, r1: *r1 })
                })
                .collect::<Result<_>>()?
        }
        EnsembleSpec::ExpurgatedParallel { q1, q2, psi, r1, r2 } => {
            let (n1, n2) = (q1.alphabet_size(), q2.alphabet_size());
            guard(simplex_count(n1, resolution) * simplex_count(n2, resolution))?;
            let g2 = simplex_grid(n2, resolution);
            let mut specs = Vec::new();
            for w1 in simplex_grid(n1, resolution) {
                for w2 in &g2 {
                    specs.push(EnsembleSpec::ExpurgatedParallel {
                        q1: Pmf::new(w1.clone())?,
                        q2: Pmf::new(w2.clone())?,
                        psi: psi.clone(),
                        r1: *r1,
                        r2: *r2,
                    });
                }
            }
            specs
        }
    };
    let points: Vec<(CurvePoint, EnsembleSpec)> = specs
        .into_par_iter()
        .map(|spec| evaluate(&spec, px, d0, d1, rate).map(|p| (p, spec)))
        .collect::<Result<_>>()?;
    Ok(pick_best(points))
}

fn guard(count: f64) -> Result<()> {
    if count > MAX_GRID_POINTS {
        return Err(usage(format!(
            "grid has {count:.0} points, more than the limit of {MAX_GRID_POINTS:.0}"
        )));
    }
    Ok(())
}
