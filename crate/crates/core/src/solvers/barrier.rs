//! Log-barrier interior-point solver for the stage-1 program.
//!
//! Works directly on the joint with the marginal constraints as linear
//! equalities and each divergence cap as a barrier term. Unlike the tilted
//! scaling search it has no trouble with slack caps, where the optimum sits
//! on a face of the transport polytope, or with very sharp kernels.

use super::{convergence, Problem, RawSolution};
use crate::error::Result;
use crate::linalg::{Cholesky, Sym};

const ZERO_CAP: f64 = 1e-14;
/// Duality-gap target relative to the cost range. Rounding in the barrier
/// gradient grows with `t`, which puts the attainable floor near 1e-11.
const GAP_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 300;

struct Cap {
    bucket: Vec<usize>,
    nb: usize,
    linear: Vec<f64>,
    constant: f64,
}

struct Barrier<'a> {
    cost: &'a [f64],
    n: usize,
    eq_rows: Vec<Vec<usize>>,
    eq_rhs: Vec<f64>,
    caps: Vec<Cap>,
}

impl Barrier<'_> {
    fn cap_value(&self, cap: &Cap, p: &[f64]) -> (f64, Vec<f64>) {
        let mut agg = vec![0.0; cap.nb];
        for (i, &b) in cap.bucket.iter().enumerate() {
            agg[b] += p[i];
        }
        let mut f = -cap.constant;
        for &a in &agg {
            if a > 0.0 {
                f += a * a.ln();
            }
        }
        for (l, pi) in cap.linear.iter().zip(p) {
            f -= l * pi;
        }
        (f, agg)
    }

    /// Barrier objective, or `None` outside the domain.
    fn phi(&self, p: &[f64], t: f64) -> Option<f64> {
        let mut v = 0.0;
        for (c, &pi) in self.cost.iter().zip(p) {
            if !(pi > 0.0) {
                return None;
            }
            v += t * c * pi - pi.ln();
        }
        for cap in &self.caps {
            let f = self.cap_value(cap, p).0;
            if !(f < 0.0) {
                return None;
            }
            v -= (-f).ln();
        }
        Some(v)
    }

    /// Minimum scaled-norm correction restoring the linear equalities.
    fn polish(&self, p: &mut [f64]) {
        let m = self.eq_rows.len();
        let mut s = Sym::zeros(m);
        for r in 0..m {
            for c in 0..m {
                *s.at(r, c) = self.eq_rows[r]
                    .iter()
                    .filter(|i| self.eq_rows[c].contains(i))
                    .map(|&i| p[i] * p[i])
                    .sum();
            }
        }
        let resid: Vec<f64> = (0..m)
            .map(|r| self.eq_rhs[r] - self.eq_rows[r].iter().map(|&i| p[i]).sum::<f64>())
            .collect();
        let scale: Vec<f64> = (0..m).map(|r| 1.0 / s.get(r, r).max(1e-300).sqrt()).collect();
        for r in 0..m {
            for c in 0..m {
                *s.at(r, c) *= scale[r] * scale[c];
            }
        }
        let rhs: Vec<f64> = resid.iter().zip(&scale).map(|(a, b)| a * b).collect();
        let w = Cholesky::new(&s, 1e-12).solve(&rhs);
        let mut delta = vec![0.0; p.len()];
        for r in 0..m {
            for &i in &self.eq_rows[r] {
                delta[i] += scale[r] * w[r] * p[i] * p[i];
            }
        }
        if p.iter().zip(&delta).all(|(a, d)| a + d > 0.0) {
            p.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
        }
    }

    /// Mixes towards the product law, which meets every constraint, just
    /// enough to undo cap overshoot left by the polish.
    fn restore_caps(&self, p: &mut [f64], product: &[f64]) {
        let over = |q: &[f64]| self.caps.iter().any(|c| self.cap_value(c, q).0 > 0.0);
        if !over(p) {
            return;
        }
        let mix = |th: f64| -> Vec<f64> {
            p.iter().zip(product).map(|(a, b)| (1.0 - th) * a + th * b).collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if over(&mix(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p.copy_from_slice(&mix(hi));
    }

    fn center(&self, p: &mut [f64], t: f64) -> Result<usize> {
        let n = self.n;
        let m = self.eq_rows.len();
        let mut quiet = 0;
        let mut stalls = 0;
        let mut previous = f64::INFINITY;
        for it in 0..MAX_NEWTON {
            let mut grad: Vec<f64> = (0..n).map(|i| t * self.cost[i] - 1.0 / p[i]).collect();
            let mut h = Sym::zeros(n);
            for i in 0..n {
                *h.at(i, i) += 1.0 / (p[i] * p[i]);
            }
            for cap in &self.caps {
                let (f, agg) = self.cap_value(cap, p);
                let w = 1.0 / -f;
                let df: Vec<f64> = (0..n)
                    .map(|i| agg[cap.bucket[i]].ln() + 1.0 - cap.linear[i])
                    .collect();
                for i in 0..n {
                    grad[i] += w * df[i];
                    for j in 0..n {
                        let mut v = w * w * df[i] * df[j];
                        if cap.bucket[i] == cap.bucket[j] {
                            v += w / agg[cap.bucket[i]];
                        }
                        *h.at(i, j) += v;
                    }
                }
            }
            // Newton system in the scaled variables p_i * y_i, which keeps the
            // Hessian diagonal at least one and S well equilibrated.
            for i in 0..n {
                grad[i] *= p[i];
                for j in 0..n {
                    *h.at(i, j) *= p[i] * p[j];
                }
            }
            let chol = Cholesky::new(&h, 1e-300);
            let hg = chol.solve(&grad);
            let z: Vec<Vec<f64>> = self
                .eq_rows
                .iter()
                .map(|row| {
                    let mut e = vec![0.0; n];
                    row.iter().for_each(|&i| e[i] = p[i]);
                    chol.solve(&e)
                })
                .collect();
            let mut s = Sym::zeros(m);
            for r in 0..m {
                for c in 0..m {
                    *s.at(r, c) = self.eq_rows[r].iter().map(|&i| p[i] * z[c][i]).sum();
                }
            }
            let scale: Vec<f64> = (0..m).map(|r| 1.0 / s.get(r, r).max(1e-300).sqrt()).collect();
            for r in 0..m {
                for c in 0..m {
                    *s.at(r, c) *= scale[r] * scale[c];
                }
            }
            let rhs: Vec<f64> = (0..m)
                .map(|r| {
                    let ap: f64 = self.eq_rows[r].iter().map(|&i| p[i]).sum();
                    let ahg: f64 = self.eq_rows[r].iter().map(|&i| p[i] * hg[i]).sum();
                    scale[r] * (-ahg - (self.eq_rhs[r] - ap))
                })
                .collect();
            let w = Cholesky::new(&s, 1e-12).solve(&rhs);
            let mut step = hg.clone();
            for r in 0..m {
                for i in 0..n {
                    step[i] += scale[r] * w[r] * z[r][i];
                }
            }
            for i in 0..n {
                step[i] *= -p[i];
                grad[i] /= p[i];
            }
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
            // Quadratic convergence puts the decrement far below this long
            // before rounding noise in phi takes over.
            if decrement.abs() <= 1e-11 {
                return Ok(it);
            }
            // Without quadratic progress the iterate sits at the rounding
            // floor of the gradient.
            if decrement < 1e-3 && decrement > 0.25 * previous {
                stalls += 1;
                if stalls > 5 {
                    return Ok(it);
                }
            }
            previous = decrement.abs();
            let mut trial: Vec<f64> = p.iter().zip(&step).map(|(a, d)| a + d).collect();
            if decrement < 1e-6 {
                // Inside the quadratic region phi is dominated by rounding at
                // large t, so full steps are taken without a descent test.
                if self.phi(&trial, t).is_none() {
                    return Ok(it);
                }
                quiet += 1;
                if quiet > 8 {
                    return Ok(it);
                }
                p.copy_from_slice(&trial);
                continue;
            }
            let base = self.phi(p, t).expect("iterate stays interior");
            let mut s_len = 1.0;
            loop {
                if let Some(v) = self.phi(&trial, t) {
                    if v <= base - 0.25 * s_len * decrement {
                        break;
                    }
                }
                s_len *= 0.5;
                if s_len < 1e-8 {
                    if decrement < 1e-3 {
                        return Ok(it);
                    }
                    return Err(convergence("barrier line search", it, decrement));
                }
                for i in 0..n {
                    trial[i] = p[i] + s_len * step[i];
                }
            }
            p.copy_from_slice(&trial);
        }
        Err(convergence("barrier centering", MAX_NEWTON, f64::NAN))
    }
}

pub(crate) fn solve(pb: &Problem, cost: &[f64]) -> Result<RawSolution> {
    let (nx, nv) = (pb.nx(), pb.nv());
    let n = nx * nv;
    let product: Vec<f64> = (0..n).map(|c| pb.px[c / nv] * pb.qv[c % nv]).collect();
    let mut eq_rows: Vec<Vec<usize>> = (0..nx).map(|x| (x * nv..(x + 1) * nv).collect()).collect();
    let mut eq_rhs = pb.px.clone();
    if !pb.iid {
        for v in 0..nv.saturating_sub(1) {
            eq_rows.push((0..nx).map(|x| x * nv + v).collect());
            eq_rhs.push(pb.qv[v]);
        }
    }
    let entropy_px: f64 = pb.px.iter().map(|p| p * p.ln()).sum();
    let mut caps = Vec::new();
    let mut soft_index = Vec::new();
    for (k, g) in pb.groups.iter().enumerate() {
        let rate = pb.caps[k];
        match g {
            None if rate <= ZERO_CAP => {
                return Ok(RawSolution {
                    p: product,
                    mu: vec![f64::INFINITY; pb.caps.len()],
                    tilt: 0.0,
                })
            }
            None => {
                let (linear, constant) = if pb.iid {
                    (product.iter().map(|q| q.ln()).collect(), rate)
                } else {
                    let hq: f64 = pb.qv.iter().map(|q| q * q.ln()).sum();
                    (vec![0.0; n], entropy_px + hq + rate)
                };
                caps.push(Cap {
                    bucket: (0..n).collect(),
                    nb: n,
                    linear,
                    constant,
                });
                soft_index.push(k);
            }
            Some((map, ng)) => {
                let mut qg = vec![0.0; *ng];
                for (v, &gv) in map.iter().enumerate() {
                    qg[gv] += pb.qv[v];
                }
                if rate <= ZERO_CAP {
                    for x in 0..nx {
                        for (gi, &q) in qg.iter().enumerate() {
                            if q > 0.0 {
                                eq_rows.push((0..nv).filter(|&v| map[v] == gi).map(|v| x * nv + v).collect());
                                eq_rhs.push(pb.px[x] * q);
                            }
                        }
                    }
                    continue;
                }
                let hq: f64 = qg.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum();
                caps.push(Cap {
                    bucket: (0..n).map(|c| (c / nv) * ng + map[c % nv]).collect(),
                    nb: nx * ng,
                    linear: vec![0.0; n],
                    constant: entropy_px + hq + rate,
                });
                soft_index.push(k);
            }
        }
    }
    let (lo, hi) = cost
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let range = (hi - lo).max(1e-300);
    let problem = Barrier {
        cost,
        n,
        eq_rows,
        eq_rhs,
        caps,
    };

    // A failed run from the product is retried from a point pulled towards
    // the cheapest cells, which sits on a different part of the path.
    let greedy: Vec<f64> = {
        let sharp: Vec<f64> = (0..n).map(|c| product[c] * (-(cost[c] - lo) / range).exp()).collect();
        let mix: Vec<f64> = sharp.iter().zip(&product).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let mut q = mix;
        problem.polish(&mut q);
        q
    };
    let starts = [product.clone(), greedy];
    let mut last_err = None;
    for start in starts {
        if problem.phi(&start, 1.0).is_none() {
            continue;
        }
        let mut p = start;
        let mut t = 1.0 / range;
        let terms = (n + problem.caps.len()) as f64;
        let mut ok = true;
        loop {
            if let Err(e) = problem.center(&mut p, t) {
                last_err = Some(e);
                ok = false;
                break;
            }
            if terms / t <= GAP_TOL * range {
                break;
            }
            t *= 10.0;
        }
        if !ok {
            continue;
        }
        let mut mu = vec![f64::INFINITY; pb.caps.len()];
        for (cap, &k) in problem.caps.iter().zip(&soft_index) {
            let f = problem.cap_value(cap, &p).0;
            mu[k] = 1.0 / (t * -f.min(-f64::MIN_POSITIVE));
        }
        problem.polish(&mut p);
        problem.restore_caps(&mut p, &product);
        let total: f64 = mu.iter().filter(|m| m.is_finite()).sum();
        log::debug!("barrier solve finished at t = {t:.1e}, multipliers {mu:?}");
        return Ok(RawSolution {
            p,
            mu,
            tilt: if total > 0.0 { -1.0 / total } else { f64::NEG_INFINITY },
        });
    }
    Err(last_err.unwrap_or_else(|| convergence("barrier start", 0, f64::NAN)))
}
