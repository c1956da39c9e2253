//! Stage 2: extremes of `E[d1]` over the set of stage-1 minimisers.
//!
//! The tie set `{P feasible : E[d0] <= d0* + eps}` is convex, so maximising
//! the linear functional `E[d1]` over it is a convex program. We solve the
//! stage-1 problem with the perturbed cost `d0 - t d1`: its minimiser `P_t`
//! maximises `E[d1]` over `{E[d0] <= E_{P_t}[d0]}`. As `t -> 0+` the value
//! tends to the maximum over the exact tie set; `t` is shrunk until the
//! `d0` excess drops below `eps`, and the last two values are extrapolated
//! linearly to `t = 0`.

use super::{solve_raw, Problem, SolverOptions};
use crate::error::{usage, Result};
use crate::prob::{DistortionMatrix, Psi};
use crate::solvers::ConstraintSet;
use serde::{Deserialize, Serialize};

/// Default tie slack, relative to the largest `d0` entry.
pub const DEFAULT_EPS_TIE: f64 = 1e-9;

const MAX_SHRINKS: usize = 16;

/// Range of `E[d1]` over the numerical tie set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieBracket {
    pub d1_min: f64,
    pub d1_max: f64,
    /// `E[d1]` at the stage-1 minimiser returned by the solver.
    pub d1_at_minimizer: f64,
}

impl TieBracket {
    pub fn width(&self) -> f64 {
        self.d1_max - self.d1_min
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns the bracket `(min, max)` of `E[d1]` over feasible joints with
/// `E[d0] <= d0_star + eps_tie * max(d0)`.
pub fn max_d1_over_ties(
    constraints: &ConstraintSet,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    psi: Option<&Psi>,
    d0_star: f64,
    eps_tie: f64,
) -> Result<TieBracket> {
    if !(eps_tie >= 0.0) {
        return Err(usage("eps_tie must be non-negative"));
    }
    if d0.rows() != d1.rows() || d0.cols() != d1.cols() {
        return Err(usage("d0 and d1 must have the same shape"));
    }
    let opts = SolverOptions::default();
    let problem = Problem::new(constraints, d0, psi)?;
    let c0 = problem.cost(|x, o| d0.get(x, o));
    let c1 = problem.cost(|x, o| d1.get(x, o));
    let base = solve_raw(&problem, &c0, &opts, None)?;
    let at_min = dot(&base.p, &c1);

    let spread = |c: &[f64]| {
        let (lo, hi) = c
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    };
    let (s0, s1) = (spread(&c0), spread(&c1));
    if s1 <= 0.0 {
        return Ok(TieBracket {
            d1_min: at_min,
            d1_max: at_min,
            d1_at_minimizer: at_min,
        });
    }
    let scale0 = d0.max_entry().max(f64::MIN_POSITIVE);
    let eps_abs = eps_tie * scale0;
    let reference = d0_star.min(dot(&base.p, &c0));

    let extreme = |sign: f64| -> Result<f64> {
        let mut t = 1e-2 * s0.max(scale0) / s1;
        let mut previous: Option<f64> = None;
        let mut accepted: Option<f64> = None;
        for _ in 0..MAX_SHRINKS {
            let cost: Vec<f64> = c0.iter().zip(&c1).map(|(a, b)| a - sign * t * b).collect();
            let raw = solve_raw(&problem, &cost, &opts, Some(&base.mu))?;
            let gap = dot(&raw.p, &c0) - reference;
            let value = dot(&raw.p, &c1);
            if let Some(v_prev) = accepted {
                // Linear extrapolation from t and t/10 to t = 0.
                return Ok(value - (v_prev - value) / 9.0);
            }
            if gap <= eps_abs {
                accepted = Some(value);
            }
            previous = Some(value);
            t /= 10.0;
        }
        log::warn!("tie bracket did not reach the requested slack; using smallest perturbation");
        Ok(previous.unwrap_or(at_min))
    };
    let hi = extreme(1.0)?;
    let lo = extreme(-1.0)?;
    // The minimiser itself lies in the tie set.
    let d1_max = hi.max(at_min);
    let d1_min = lo.min(at_min);
    Ok(TieBracket {
        d1_min,
        d1_max,
        d1_at_minimizer: at_min,
    })
}
