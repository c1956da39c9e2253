//! Closed-form tilt for the i.i.d. ensemble: each row of the minimiser is
//! `q(v) exp(lambda c(x,v))` normalised, with `lambda` set by bisection so the
//! divergence to `px × q` meets the cap.

use super::{Problem, RawSolution};
use crate::error::Result;

const MAX_BISECTIONS: usize = 400;

fn cost_range(cost: &[f64]) -> f64 {
    let (lo, hi) = cost
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    hi - lo
}

fn row_minima(pb: &Problem, cost: &[f64]) -> Vec<f64> {
    cost.chunks(pb.nv())
        .map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect()
}

/// Rate at which the tilt saturates, and the saturated law.
pub(crate) fn saturation(pb: &Problem, cost: &[f64]) -> (f64, Vec<f64>) {
    let (nx, nv) = (pb.nx(), pb.nv());
    let tie = 1e-12 * cost_range(cost).max(1e-300);
    let mins = row_minima(pb, cost);
    let mut p = vec![0.0; nx * nv];
    let mut rmax = 0.0;
    for x in 0..nx {
        let row = &cost[x * nv..(x + 1) * nv];
        let mass: f64 = (0..nv).filter(|&v| row[v] <= mins[x] + tie).map(|v| pb.qv[v]).sum();
        rmax -= pb.px[x] * mass.ln();
        for v in 0..nv {
            if row[v] <= mins[x] + tie {
                p[x * nv + v] = pb.px[x] * pb.qv[v] / mass;
            }
        }
    }
    (rmax.max(0.0), p)
}

fn tilted(pb: &Problem, cost: &[f64], mins: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let (nx, nv) = (pb.nx(), pb.nv());
    let mut p = vec![0.0; nx * nv];
    let mut div = 0.0;
    for x in 0..nx {
        let row = &cost[x * nv..(x + 1) * nv];
        // Shifted by the row minimum so the largest weight is q(v) itself.
        let logw: Vec<f64> = (0..nv)
            .map(|v| pb.qv[v].ln() + lambda * (row[v] - mins[x]))
            .collect();
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + logw.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let mut row_div = 0.0;
        for v in 0..nv {
            let lp = logw[v] - log_z;
            let pv = lp.exp();
            p[x * nv + v] = pb.px[x] * pv;
            if pv > 0.0 {
                row_div += pv * (lp - pb.qv[v].ln());
            }
        }
        div += pb.px[x] * row_div;
    }
    (p, div.max(0.0))
}

pub(crate) fn solve(pb: &Problem, cost: &[f64], rate: f64) -> Result<RawSolution> {
    let (nx, nv) = (pb.nx(), pb.nv());
    let range = cost_range(cost);
    let product = || -> Vec<f64> {
        (0..nx * nv).map(|c| pb.px[c / nv] * pb.qv[c % nv]).collect()
    };
    if rate <= 0.0 || range <= 0.0 {
        return Ok(RawSolution {
            p: product(),
            mu: vec![f64::INFINITY],
            tilt: 0.0,
        });
    }
    let (rmax, p_sat) = saturation(pb, cost);
    if rate >= rmax {
        return Ok(RawSolution {
            p: p_sat,
            mu: vec![0.0],
            tilt: f64::NEG_INFINITY,
        });
    }
    let mins = row_minima(pb, cost);
    let div_at = |l: f64| tilted(pb, cost, &mins, l).1;
    let mut lo = -1.0 / range;
    let mut doublings = 0;
    while div_at(lo) < rate {
        lo *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(super::convergence("i.i.d. tilt bracketing", doublings, rate - div_at(lo)));
        }
    }
    let mut hi = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = div_at(mid);
        if d > rate {
            lo = mid;
        } else {
            hi = mid;
            if rate - d <= 1e-15 * (1.0 + rate) {
                break;
            }
        }
    }
    let (p, _) = tilted(pb, cost, &mins, hi);
    Ok(RawSolution {
        p,
        mu: vec![-1.0 / hi],
        tilt: hi,
    })
}
