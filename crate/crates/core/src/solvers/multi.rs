//! Stage-1 solver for fixed reconstruction-side laws with several mutual
//! information caps.
//!
//! Each capped term `I(X; g(V))` is written variationally as
//! `min_r D(P ‖ px · q_g · r(v | x, g))`. For fixed multipliers `mu_k` the
//! Lagrangian is then minimised by alternating a tilted marginal scaling in
//! `P` with the closed-form refit `r_k = P / P_{X,g_k}`. The multipliers are
//! found by cycling over caps and solving each complementary-slackness
//! condition by a safeguarded secant search in `ln mu`.
//!
//! The barrier solver runs first. This search is the fallback and the
//! independent check in tests; it cannot reach optima where the full cap is
//! slack, and marginal scaling slows down sharply as the multipliers shrink.

use super::barrier;
use super::ipf::{Projection, Scaler};
use super::{convergence, Method, Problem, RawSolution, SolverOptions};
use crate::error::Result;

/// Caps at or below this many nats are enforced as exact independence.
const ZERO_CAP: f64 = 1e-14;
const MU_CEIL: f64 = 1e14;

#[derive(Debug, Clone)]
struct SoftCap {
    cap: usize,
    /// `None` for the full reconstruction side.
    group: Option<(Vec<usize>, usize)>,
    log_qg: Vec<f64>,
    lower: f64,
}

struct Engine<'a> {
    pb: &'a Problem,
    cost: &'a [f64],
    log_base: Vec<f64>,
    log_px: Vec<f64>,
    soft: Vec<SoftCap>,
    /// Entropic weight towards `px × qv` when no full cap is present.
    mu0: f64,
    log_r: Vec<Vec<f64>>,
    scaler: Scaler,
    inner_tol: f64,
    max_inner: usize,
    logp: Vec<f64>,
    evaluations: usize,
}

fn lse(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl<'a> Engine<'a> {
    fn new(pb: &'a Problem, cost: &'a [f64], opts: &SolverOptions, range: f64) -> Self {
        let (nx, nv) = (pb.nx(), pb.nv());
        let n = nx * nv;
        let log_px: Vec<f64> = pb.px.iter().map(|p| p.ln()).collect();
        let log_base: Vec<f64> = (0..n).map(|c| log_px[c / nv] + pb.qv[c % nv].ln()).collect();
        let mut projections = vec![
            Projection::new((0..n).map(|c| c / nv).collect(), &pb.px),
            Projection::new((0..n).map(|c| c % nv).collect(), &pb.qv),
        ];
        let mut soft = Vec::new();
        let mut has_full = false;
        for (k, g) in pb.groups.iter().enumerate() {
            let qg = g.as_ref().map(|(map, ng)| {
                let mut q = vec![0.0; *ng];
                for (v, &gv) in map.iter().enumerate() {
                    q[gv] += pb.qv[v];
                }
                q
            });
            if pb.caps[k] <= ZERO_CAP {
                if let (Some((map, ng)), Some(qg)) = (g, &qg) {
                    // Exact independence of X and g(V).
                    let target: Vec<f64> = (0..nx * ng).map(|b| pb.px[b / ng] * qg[b % ng]).collect();
                    let keep: Vec<usize> = (0..nx * ng).filter(|&b| target[b] > 0.0).collect();
                    let mut relabel = vec![usize::MAX; nx * ng];
                    for (i, &b) in keep.iter().enumerate() {
                        relabel[b] = i;
                    }
                    let bucket = (0..n).map(|c| relabel[(c / nv) * ng + map[c % nv]]).collect();
                    let t: Vec<f64> = keep.iter().map(|&b| target[b]).collect();
                    projections.push(Projection::new(bucket, &t));
                    continue;
                }
            }
            let lower = if g.is_none() && !has_full {
                has_full = true;
                opts.mu_floor * range
            } else {
                0.0
            };
            let log_qg = qg.map(|q| q.iter().map(|v| v.ln()).collect()).unwrap_or_default();
            soft.push(SoftCap {
                cap: k,
                group: g.clone(),
                log_qg,
                lower,
            });
        }
        let log_r = soft
            .iter()
            .map(|s| match &s.group {
                None => Vec::new(),
                Some((map, _)) => (0..n)
                    .map(|c| {
                        let v = c % nv;
                        pb.qv[v].ln() - s.log_qg[map[v]]
                    })
                    .collect(),
            })
            .collect();
        let mut scaler = Scaler::new(projections);
        scaler.tol = opts.scale_tol;
        Engine {
            pb,
            cost,
            log_base,
            log_px,
            soft,
            mu0: if has_full { 0.0 } else { opts.mu_floor * range },
            log_r,
            scaler,
            inner_tol: 1e-15,
            max_inner: opts.max_inner,
            logp: Vec::new(),
            evaluations: 0,
        }
    }

    fn log_kernel(&self, mu: &[f64]) -> Vec<f64> {
        let nv = self.pb.nv();
        let total: f64 = self.mu0 + mu.iter().sum::<f64>();
        (0..self.cost.len())
            .map(|c| {
                let mut acc = -self.cost[c] + self.mu0 * self.log_base[c];
                for (s, (&m, r)) in self.soft.iter().zip(mu.iter().zip(&self.log_r)) {
                    if m == 0.0 {
                        continue;
                    }
                    acc += m * match &s.group {
                        None => self.log_base[c],
                        Some((map, _)) => self.log_px[c / nv] + s.log_qg[map[c % nv]] + r[c],
                    };
                }
                acc / total
            })
            .collect()
    }

    fn refit_conditionals(&mut self, logp: &[f64]) {
        let (nx, nv) = (self.pb.nx(), self.pb.nv());
        for (s, r) in self.soft.iter().zip(self.log_r.iter_mut()) {
            let Some((map, ng)) = &s.group else { continue };
            for x in 0..nx {
                let row = &logp[x * nv..(x + 1) * nv];
                for g in 0..*ng {
                    let members = (0..nv).filter(|&v| map[v] == g);
                    let norm = lse(members.clone().map(|v| row[v]));
                    for v in members {
                        r[x * nv + v] = row[v] - norm;
                    }
                }
            }
        }
    }

    /// Minimises the Lagrangian for fixed multipliers; returns the
    /// divergence of every soft cap.
    fn evaluate(&mut self, mu: &[f64]) -> Result<Vec<f64>> {
        self.evaluations += 1;
        let any_group = self
            .soft
            .iter()
            .zip(mu)
            .any(|(s, &m)| s.group.is_some() && m > 0.0);
        let mut prev: Option<Vec<f64>> = None;
        let mut last_diff = f64::INFINITY;
        let mut converged = false;
        for _ in 0..self.max_inner {
            let logk = self.log_kernel(mu);
            let logp = self.scaler.fit(&logk)?;
            self.refit_conditionals(&logp);
            if !any_group {
                self.logp = logp;
                converged = true;
                break;
            }
            if let Some(old) = &prev {
                last_diff = old
                    .iter()
                    .zip(&logp)
                    .map(|(a, b)| (a.exp() - b.exp()).abs())
                    .fold(0.0, f64::max);
                if last_diff <= self.inner_tol {
                    self.logp = logp;
                    converged = true;
                    break;
                }
            }
            prev = Some(logp);
        }
        if !converged {
            if last_diff > 1e-11 {
                return Err(convergence("alternating conditional refit", self.max_inner, last_diff));
            }
            self.logp = prev.expect("at least one sweep");
        }
        let p = self.p();
        Ok(self.soft.iter().map(|s| self.pb.divergence(&p, s.cap)).collect())
    }

    fn p(&self) -> Vec<f64> {
        self.logp.iter().map(|l| l.exp()).collect()
    }
}

/// Safeguarded secant (Illinois) search for `f(ln mu) = 0` with `f`
/// decreasing; returns a point on the feasible side `f <= tol`.
fn fit_cap(
    eng: &mut Engine,
    mu: &mut [f64],
    k: usize,
    rate: f64,
    tol: f64,
    range: f64,
) -> Result<()> {
    let lower = eng.soft[k].lower;
    let f = |eng: &mut Engine, mu: &mut [f64], m: f64| -> Result<f64> {
        mu[k] = m;
        Ok(eng.evaluate(mu)?[k] - rate)
    };
    let tiny = (range * 1e-9).max(lower);
    let start = if mu[k] > lower { mu[k] } else { (range * 1e-1).max(2.0 * lower) };
    let mut m = start.max(tiny);
    let mut fm = f(eng, mu, m)?;
    let (mut lo, mut f_lo, mut hi, mut f_hi);
    if fm > 0.0 {
        lo = m;
        f_lo = fm;
        loop {
            m *= 4.0;
            if m > MU_CEIL * range {
                if fm <= 1e3 * tol {
                    return Ok(());
                }
                return Err(convergence("multiplier bracketing", 0, fm));
            }
            fm = f(eng, mu, m)?;
            if fm <= 0.0 {
                hi = m;
                f_hi = fm;
                break;
            }
            lo = m;
            f_lo = fm;
        }
    } else {
        hi = m;
        f_hi = fm;
        loop {
            m /= 4.0;
            if m <= tiny {
                // Very small multipliers make the kernel too sharp to scale;
                // a cap still slack here is reported at its floor.
                if lower > 0.0 {
                    mu[k] = lower;
                    return Ok(());
                }
                let f_zero = f(eng, mu, 0.0)?;
                if f_zero <= tol {
                    return Ok(());
                }
                lo = 0.0;
                f_lo = f_zero;
                break;
            }
            fm = f(eng, mu, m)?;
            if fm > 0.0 {
                lo = m;
                f_lo = fm;
                break;
            }
            hi = m;
            f_hi = fm;
        }
    }
    if f_hi >= -tol {
        mu[k] = hi;
        return Ok(());
    }
    // Secant steps in ln(mu) when both ends are positive, linear otherwise.
    let mut side = 0i8;
    for _ in 0..200 {
        let (a, b) = if lo > 0.0 { (lo.ln(), hi.ln()) } else { (lo, hi) };
        let mut s = b - f_hi * (b - a) / (f_hi - f_lo);
        if !(s > a.min(b) && s < a.max(b)) {
            s = 0.5 * (a + b);
        }
        let m = if lo > 0.0 { s.exp() } else { s };
        if (hi - lo).abs() <= 1e-14 * hi {
            break;
        }
        let fm = f(eng, mu, m)?;
        if fm.abs() <= tol && fm <= tol {
            return Ok(());
        }
        if fm > 0.0 {
            lo = m;
            f_lo = fm;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = m;
            f_hi = fm;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    mu[k] = hi;
    Ok(())
}

pub(crate) fn solve(
    pb: &Problem,
    cost: &[f64],
    opts: &SolverOptions,
    warm_mu: Option<&[f64]>,
) -> Result<RawSolution> {
    let (nx, nv) = (pb.nx(), pb.nv());
    let (lo, hi) = cost
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let range = hi - lo;
    let full_zero = pb
        .groups
        .iter()
        .zip(&pb.caps)
        .any(|(g, &r)| g.is_none() && r <= ZERO_CAP);
    if range <= 0.0 || full_zero {
        let p = (0..nx * nv).map(|c| pb.px[c / nv] * pb.qv[c % nv]).collect();
        return Ok(RawSolution {
            p,
            mu: vec![f64::INFINITY; pb.caps.len()],
            tilt: 0.0,
        });
    }
    match opts.method {
        Method::Barrier => return barrier::solve(pb, cost),
        Method::Auto => match barrier::solve(pb, cost) {
            Ok(raw) => return Ok(raw),
            Err(e) => log::warn!("barrier solver failed ({e}); trying the tilted search"),
        },
        Method::Tilted => {}
    }
    let mut eng = Engine::new(pb, cost, opts, range);
    let mut mu: Vec<f64> = eng.soft.iter().map(|s| s.lower).collect();
    if let Some(w) = warm_mu {
        for (i, s) in eng.soft.iter().enumerate() {
            if let Some(&v) = w.get(s.cap) {
                if v.is_finite() && v > s.lower {
                    mu[i] = v;
                }
            }
        }
    }
    let rates: Vec<f64> = eng.soft.iter().map(|s| pb.caps[s.cap]).collect();
    let done = search(&mut eng, &mut mu, &rates, opts, range)?;
    // A full cap pinned at its floor means the optimum lies on a face of
    // the transport polytope that the tilted family cannot reach.
    let slack_full = eng
        .soft
        .iter()
        .zip(&mu)
        .any(|(s, &m)| s.group.is_none() && m <= s.lower);
    if !done || slack_full || eng.mu0 > 0.0 {
        return Err(convergence("tilted multiplier search", opts.max_cycles, f64::NAN));
    }
    let mut mu_all = vec![f64::INFINITY; pb.caps.len()];
    for (s, &m) in eng.soft.iter().zip(&mu) {
        mu_all[s.cap] = m;
    }
    Ok(RawSolution {
        p: eng.p(),
        mu: mu_all,
        tilt: -1.0 / mu.iter().sum::<f64>(),
    })
}

fn search(
    eng: &mut Engine,
    mu: &mut [f64],
    rates: &[f64],
    opts: &SolverOptions,
    range: f64,
) -> Result<bool> {
    let ns = rates.len();
    let tol = |r: f64| opts.div_tol * (1.0 + r);
    let worst = tol(rates.iter().cloned().fold(0.0, f64::max));
    for cycle in 0..opts.max_cycles {
        for k in 0..ns {
            fit_cap(eng, mu, k, rates[k], tol(rates[k]), range)?;
        }
        let divs = eng.evaluate(mu)?;
        let residual = (0..ns)
            .map(|k| {
                let gap = divs[k] - rates[k];
                if mu[k] > eng.soft[k].lower {
                    gap.abs()
                } else {
                    gap.max(0.0)
                }
            })
            .fold(0.0, f64::max);
        log::debug!(
            "multi-cap cycle {cycle}: mu {mu:?}, residual {residual:.2e}, {} evaluations",
            eng.evaluations
        );
        if ns == 1 || residual <= 100.0 * worst {
            return Ok(true);
        }
    }
    Ok(false)
}
