//! Two-stage optimisers over joint distributions.
//!
//! Stage 1 minimises `E[d0]` over joints with a fixed source marginal, a
//! fixed (or reference) reconstruction-side law and one or more divergence
//! caps. Stage 2 maximises `E[d1]` over the set of stage-1 minimisers.

mod barrier;
mod iid;
mod ipf;
mod multi;
mod ties;

pub use ties::{max_d1_over_ties, TieBracket, DEFAULT_EPS_TIE};

use crate::error::{usage, MrdError, Result};
use crate::prob::{Axis, DistortionMatrix, JointPmf, Pmf, Psi};
use crate::units::{Divergence, Rate};
use serde::{Deserialize, Serialize};

/// Law of the reconstruction side of the joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherMarginal {
    /// Reference law `Q`; the reconstruction marginal is free and the cap
    /// bounds `D(P ‖ Π × Q)` (i.i.d. ensemble).
    Reference(Pmf),
    /// Reconstruction marginal fixed to `Q` (constant composition).
    Fixed(Pmf),
    /// `(U, Xhat)` marginal fixed to the given joint (superposition).
    Cloud(JointPmf),
    /// `(Xhat1, Xhat2)` marginal fixed to the product `Q1 × Q2`.
    Pair(Pmf, Pmf),
}

/// Which reconstruction-side variable a divergence cap applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapScope {
    /// The whole reconstruction side: `I(X; U, Xhat)` or `I(X; Xhat1, Xhat2)`.
    Full,
    /// `U` for clouds, `Xhat1` for pairs.
    First,
    /// `Xhat2` for pairs.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCap {
    pub scope: CapScope,
    pub rate: Rate,
}

/// Feasible set of a stage-1 problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub px: Pmf,
    pub other: OtherMarginal,
    pub caps: Vec<DivergenceCap>,
}

impl ConstraintSet {
    pub fn cc(px: Pmf, q: Pmf, rate: Rate) -> Self {
        ConstraintSet {
            px,
            other: OtherMarginal::Fixed(q),
            caps: vec![DivergenceCap { scope: CapScope::Full, rate }],
        }
    }

    pub fn iid(px: Pmf, q: Pmf, rate: Rate) -> Self {
        ConstraintSet {
            px,
            other: OtherMarginal::Reference(q),
            caps: vec![DivergenceCap { scope: CapScope::Full, rate }],
        }
    }

    pub fn superposition(px: Pmf, q_uxhat: JointPmf, r0: Rate, r1: Rate) -> Self {
        ConstraintSet {
            px,
            other: OtherMarginal::Cloud(q_uxhat),
            caps: vec![
                DivergenceCap { scope: CapScope::First, rate: r0 },
                DivergenceCap { scope: CapScope::Full, rate: r0 + r1 },
            ],
        }
    }

    pub fn expurgated(px: Pmf, q1: Pmf, q2: Pmf, r1: Rate, r2: Rate) -> Self {
        ConstraintSet {
            px,
            other: OtherMarginal::Pair(q1, q2),
            caps: vec![
                DivergenceCap { scope: CapScope::First, rate: r1 },
                DivergenceCap { scope: CapScope::Second, rate: r2 },
                DivergenceCap { scope: CapScope::Full, rate: r1 + r2 },
            ],
        }
    }

    /// Whether the reconstruction side must be a product of two laws.
    pub fn product_structure_required(&self) -> bool {
        matches!(self.other, OtherMarginal::Pair(..))
    }
}

/// Outcome of a stage-1 solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage1Result {
    /// Minimal expected `d0`.
    pub d0_star: f64,
    pub minimizer: JointPmf,
    /// One Lagrange multiplier per cap, as a slope `dD0/dR <= 0`.
    pub multipliers: Vec<f64>,
    /// Exponential tilt `lambda <= 0` of the minimiser's kernel.
    pub tilt: f64,
    /// Which caps hold with equality.
    pub active: Vec<bool>,
    /// Divergence of the minimiser for each cap.
    pub divergences: Vec<Divergence>,
}

/// Internal solver settings.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SolverOptions {
    /// Accuracy of the cap divergences at an active cap, in nats.
    pub div_tol: f64,
    /// Scaling tolerance on marginal residuals (l1).
    pub scale_tol: f64,
    /// Smallest entropic weight relative to the cost range.
    pub mu_floor: f64,
    pub max_cycles: usize,
    /// Alternations between scaling and conditional refits per evaluation.
    pub max_inner: usize,
    pub method: Method,
}

/// Stage-1 algorithm for fixed reconstruction-side laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) enum Method {
    /// Barrier solver, with the tilted search as a fallback.
    Auto,
    Barrier,
    Tilted,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            div_tol: 1e-12,
            scale_tol: 1e-13,
            mu_floor: 1e-4,
            max_cycles: 400,
            max_inner: 20_000,
            method: Method::Auto,
        }
    }
}

/// A constraint set flattened onto `(x, cell)` pairs, with zero-mass source
/// symbols and reconstruction cells removed.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub iid: bool,
    pub nx_full: usize,
    pub rows: Vec<usize>,
    pub px: Vec<f64>,
    /// Kept cells as offsets into the full reconstruction-side layout.
    pub cells: Vec<usize>,
    pub qv: Vec<f64>,
    /// Reconstruction symbol of each kept cell.
    pub out: Vec<usize>,
    /// Per cap: `None` for the full side, otherwise (group of each kept cell,
    /// number of groups).
    pub groups: Vec<Option<(Vec<usize>, usize)>>,
    pub caps: Vec<f64>,
    pub axes: Vec<Axis>,
    pub side_shape: Vec<usize>,
}

impl Problem {
    pub fn new(cs: &ConstraintSet, d: &DistortionMatrix, psi: Option<&Psi>) -> Result<Self> {
        let px_full = cs.px.probs();
        if d.rows() != px_full.len() {
            return Err(usage(format!(
                "distortion matrix has {} rows but the source alphabet has {}",
                d.rows(),
                px_full.len()
            )));
        }
        if cs.caps.is_empty() {
            return Err(usage("at least one divergence cap is required"));
        }
        for c in &cs.caps {
            if !(c.rate.in_nats() >= 0.0) {
                return Err(usage("divergence caps must be non-negative"));
            }
        }
        let (iid, axes, side_shape, qfull, out_full, coords): (
            bool,
            Vec<Axis>,
            Vec<usize>,
            Vec<f64>,
            Vec<usize>,
            Vec<(usize, usize)>,
        ) = match &cs.other {
            OtherMarginal::Reference(q) | OtherMarginal::Fixed(q) => {
                let n = q.alphabet_size();
                if psi.is_some() {
                    return Err(usage("psi only applies to paired reconstructions"));
                }
                if d.cols() != n {
                    return Err(usage("distortion columns do not match the reconstruction alphabet"));
                }
                (
                    matches!(cs.other, OtherMarginal::Reference(_)),
                    vec![Axis::X, Axis::Xhat],
                    vec![n],
                    q.probs().to_vec(),
                    (0..n).collect(),
                    (0..n).map(|v| (v, v)).collect(),
                )
            }
            OtherMarginal::Cloud(j) => {
                if j.axes() != [Axis::U, Axis::Xhat] {
                    return Err(usage("cloud law must have axes (U, Xhat)"));
                }
                if psi.is_some() {
                    return Err(usage("psi only applies to paired reconstructions"));
                }
                let (nu, nh) = (j.shape()[0], j.shape()[1]);
                if d.cols() != nh {
                    return Err(usage("distortion columns do not match the reconstruction alphabet"));
                }
                (
                    false,
                    vec![Axis::X, Axis::U, Axis::Xhat],
                    vec![nu, nh],
                    j.probs().to_vec(),
                    (0..nu * nh).map(|v| v % nh).collect(),
                    (0..nu * nh).map(|v| (v / nh, v % nh)).collect(),
                )
            }
            OtherMarginal::Pair(q1, q2) => {
                let (n1, n2) = (q1.alphabet_size(), q2.alphabet_size());
                let psi = psi.ok_or_else(|| usage("paired reconstructions need a psi map"))?;
                if psi.dims() != (n1, n2) || psi.output_size != d.cols() {
                    return Err(usage("psi does not match the pair alphabets or distortion"));
                }
                (
                    false,
                    vec![Axis::X, Axis::Xhat1, Axis::Xhat2],
                    vec![n1, n2],
                    (0..n1 * n2).map(|v| q1.get(v / n2) * q2.get(v % n2)).collect(),
                    (0..n1 * n2).map(|v| psi.apply(v / n2, v % n2)).collect(),
                    (0..n1 * n2).map(|v| (v / n2, v % n2)).collect(),
                )
            }
        };
        let rows: Vec<usize> = (0..px_full.len()).filter(|&x| px_full[x] > 0.0).collect();
        let cells: Vec<usize> = (0..qfull.len()).filter(|&v| qfull[v] > 0.0).collect();
        let px: Vec<f64> = rows.iter().map(|&x| px_full[x]).collect();
        let qv: Vec<f64> = cells.iter().map(|&v| qfull[v]).collect();
        let out = cells.iter().map(|&v| out_full[v]).collect();
        let mut groups = Vec::with_capacity(cs.caps.len());
        for c in &cs.caps {
            let g = match (c.scope, &cs.other) {
                (CapScope::Full, _) => None,
                (CapScope::First, OtherMarginal::Cloud(_) | OtherMarginal::Pair(..)) => {
                    Some((cells.iter().map(|&v| coords[v].0).collect(), side_shape[0]))
                }
                (CapScope::Second, OtherMarginal::Pair(..)) => {
                    Some((cells.iter().map(|&v| coords[v].1).collect(), side_shape[1]))
                }
                (scope, _) => {
                    return Err(usage(format!(
                        "cap scope {scope:?} does not apply to this reconstruction law"
                    )))
                }
            };
            groups.push(g);
        }
        if iid && groups.iter().any(Option::is_some) {
            return Err(usage("i.i.d. constraint sets take a single full cap"));
        }
        if iid && cs.caps.len() != 1 {
            return Err(usage("i.i.d. constraint sets take a single full cap"));
        }
        Ok(Problem {
            iid,
            nx_full: px_full.len(),
            rows,
            px,
            cells,
            qv,
            out,
            groups,
            caps: cs.caps.iter().map(|c| c.rate.in_nats()).collect(),
            axes,
            side_shape,
        })
    }

    pub fn nx(&self) -> usize {
        self.rows.len()
    }

    pub fn nv(&self) -> usize {
        self.cells.len()
    }

    /// Flat cost over kept `(x, cell)` pairs.
    pub fn cost(&self, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.nx() * self.nv());
        for &x in &self.rows {
            for &o in &self.out {
                c.push(f(x, o));
            }
        }
        c
    }

    /// Reinserts stripped symbols as zero-mass entries.
    pub fn embed(&self, p: &[f64]) -> Result<JointPmf> {
        let nside: usize = self.side_shape.iter().product();
        let mut full = vec![0.0; self.nx_full * nside];
        let nv = self.nv();
        for (i, &x) in self.rows.iter().enumerate() {
            for (j, &v) in self.cells.iter().enumerate() {
                full[x * nside + v] = p[i * nv + j];
            }
        }
        let mut shape = vec![self.nx_full];
        shape.extend_from_slice(&self.side_shape);
        JointPmf::from_flat_normalized(self.axes.clone(), shape, full)
    }

    /// Divergence of `p` for cap `k`: `D(P ‖ px × q)` for i.i.d. sets,
    /// mutual information with the capped variable otherwise.
    pub fn divergence(&self, p: &[f64], k: usize) -> f64 {
        let (nx, nv) = (self.nx(), self.nv());
        if self.iid {
            let mut d = 0.0;
            for x in 0..nx {
                for v in 0..nv {
                    d += crate::prob::xlogy(p[x * nv + v], self.px[x] * self.qv[v]);
                }
            }
            return d.max(0.0);
        }
        match &self.groups[k] {
            None => {
                let m: Vec<Vec<f64>> = p.chunks(nv).map(<[f64]>::to_vec).collect();
                crate::prob::mutual_info_matrix(&m)
            }
            Some((g, ng)) => {
                let mut m = vec![vec![0.0; *ng]; nx];
                for x in 0..nx {
                    for v in 0..nv {
                        m[x][g[v]] += p[x * nv + v];
                    }
                }
                crate::prob::mutual_info_matrix(&m)
            }
        }
    }
}

/// Raw output of the flat solvers.
#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub p: Vec<f64>,
    /// Per-cap multipliers `mu_k >= 0` on the divergences.
    pub mu: Vec<f64>,
    pub tilt: f64,
}

pub(crate) fn solve_raw(
    problem: &Problem,
    cost: &[f64],
    opts: &SolverOptions,
    warm_mu: Option<&[f64]>,
) -> Result<RawSolution> {
    if problem.iid {
        iid::solve(problem, cost, problem.caps[0])
    } else {
        multi::solve(problem, cost, opts, warm_mu)
    }
}

pub(crate) fn finish(
    problem: &Problem,
    raw: RawSolution,
    d0: &DistortionMatrix,
    opts: &SolverOptions,
) -> Result<Stage1Result> {
    let cost = problem.cost(|x, o| d0.get(x, o));
    let d0_star = raw.p.iter().zip(&cost).map(|(p, c)| p * c).sum();
    let divs: Vec<f64> = (0..problem.caps.len())
        .map(|k| problem.divergence(&raw.p, k))
        .collect();
    let active = divs
        .iter()
        .zip(&problem.caps)
        .map(|(d, r)| (d - r).abs() <= 1e3 * opts.div_tol.max(1e-12) * (1.0 + r))
        .collect();
    Ok(Stage1Result {
        d0_star,
        minimizer: problem.embed(&raw.p)?,
        multipliers: raw.mu.iter().map(|m| -m).collect(),
        tilt: raw.tilt,
        active,
        divergences: divs.into_iter().map(Divergence::from_nats).collect(),
    })
}

fn require_positive(p: &Pmf, what: &str) -> Result<()> {
    if p.probs().iter().any(|&v| v <= 0.0) {
        return Err(usage(format!("{what} must be strictly positive")));
    }
    Ok(())
}

/// Scales `px(x) q(xhat) exp(lambda d0(x, xhat))` to marginals `(px, q)`.
pub fn sinkhorn_tilt(
    px: &Pmf,
    q: &Pmf,
    d0: &DistortionMatrix,
    lambda: f64,
    tol: f64,
) -> Result<JointPmf> {
    require_positive(px, "source marginal")?;
    require_positive(q, "reconstruction marginal")?;
    if !(lambda <= 0.0) || !(tol > 0.0) {
        return Err(usage("sinkhorn_tilt needs lambda <= 0 and tol > 0"));
    }
    if d0.rows() != px.alphabet_size() || d0.cols() != q.alphabet_size() {
        return Err(usage("distortion shape does not match the marginals"));
    }
    let (nx, nv) = (px.alphabet_size(), q.alphabet_size());
    let logk: Vec<f64> = (0..nx * nv)
        .map(|c| {
            let (x, v) = (c / nv, c % nv);
            px.get(x).ln() + q.get(v).ln() + lambda * d0.get(x, v)
        })
        .collect();
    let mut scaler = ipf::Scaler::new(vec![
        ipf::Projection::new((0..nx * nv).map(|c| c / nv).collect(), px.probs()),
        ipf::Projection::new((0..nx * nv).map(|c| c % nv).collect(), q.probs()),
    ]);
    scaler.tol = tol;
    let logp = scaler.fit(&logk)?;
    JointPmf::from_flat_normalized(
        vec![Axis::X, Axis::Xhat],
        vec![nx, nv],
        logp.iter().map(|l| l.exp()).collect(),
    )
}

fn min_d0_with(cs: &ConstraintSet, d0: &DistortionMatrix, psi: Option<&Psi>) -> Result<Stage1Result> {
    let opts = SolverOptions::default();
    let problem = Problem::new(cs, d0, psi)?;
    let cost = problem.cost(|x, o| d0.get(x, o));
    let raw = solve_raw(&problem, &cost, &opts, None)?;
    finish(&problem, raw, d0, &opts)
}

/// Minimal `E[d0]` over joints with marginals `(px, q)` and `I(X;Xhat) <= R`.
pub fn min_d0_cc(px: &Pmf, q: &Pmf, d0: &DistortionMatrix, rate: Rate) -> Result<Stage1Result> {
    min_d0_with(&ConstraintSet::cc(px.clone(), q.clone(), rate), d0, None)
}

/// Minimal `E[d0]` over joints with source marginal `px` and
/// `D(P ‖ px × q) <= R`.
pub fn min_d0_iid(px: &Pmf, q: &Pmf, d0: &DistortionMatrix, rate: Rate) -> Result<Stage1Result> {
    min_d0_with(&ConstraintSet::iid(px.clone(), q.clone(), rate), d0, None)
}

/// Minimal `E[d0 ∘ psi]` under an arbitrary constraint set.
pub fn min_d0_multi(
    constraints: &ConstraintSet,
    d0: &DistortionMatrix,
    psi: Option<&Psi>,
) -> Result<Stage1Result> {
    min_d0_with(constraints, d0, psi)
}

/// Rate beyond which the i.i.d. stage-1 minimum reaches its floor
/// `E_px[min_xhat d0]`: the divergence of `q` restricted to each row's
/// minimising set.
pub fn iid_saturation_rate(px: &Pmf, q: &Pmf, d0: &DistortionMatrix) -> Result<Rate> {
    let cs = ConstraintSet::iid(px.clone(), q.clone(), Rate::ZERO);
    let problem = Problem::new(&cs, d0, None)?;
    let cost = problem.cost(|x, o| d0.get(x, o));
    Ok(Rate::nats(iid::saturation(&problem, &cost).0))
}

pub(crate) fn convergence(context: &str, iterations: usize, residual: f64) -> MrdError {
    MrdError::Convergence {
        context: context.to_string(),
        iterations,
        residual,
    }
}

#[cfg(test)]
mod tests;
