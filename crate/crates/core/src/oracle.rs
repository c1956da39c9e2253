//! Brute-force reference for the constant-composition bound on small
//! alphabets.
//!
//! The joint is parameterised by its free block (all but the last row and
//! column), enumerated on a grid, and the best grid point is refined by
//! successively finer local grids. No Lagrangian structure is used, so the result is independent of
//! the solvers it checks.

use crate::error::{usage, Result};
use crate::prob::{DistortionMatrix, Pmf};
use crate::units::Rate;
use rayon::prelude::*;
use serde::Serialize;

/// Largest number of grid points enumerated before the grid is coarsened.
pub const MAX_GRID_POINTS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub d0_star: f64,
    /// Largest `d1` over joints within `tie_slack` of `d0_star`.
    pub d1_max: f64,
    /// Grid spacing actually enumerated.
    pub step: f64,
    pub grid_points: usize,
}

struct Instance<'a> {
    px: &'a [f64],
    q: &'a [f64],
    d0: &'a DistortionMatrix,
    d1: &'a DistortionMatrix,
    cap: f64,
}

impl Instance<'_> {
    fn nx(&self) -> usize {
        self.px.len()
    }

    fn ny(&self) -> usize {
        self.q.len()
    }

    fn joint(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut p = vec![0.0; nx * ny];
        let k = ny - 1;
        for x in 0..nx - 1 {
            let mut row = 0.0;
            for y in 0..k {
                p[x * ny + y] = z[x * k + y];
                row += z[x * k + y];
            }
            p[x * ny + k] = self.px[x] - row;
        }
        for y in 0..ny {
            let col: f64 = (0..nx - 1).map(|x| p[x * ny + y]).sum();
            p[(nx - 1) * ny + y] = self.q[y] - col;
        }
        if p.iter().any(|&v| v < -1e-13) {
            return None;
        }
        for v in &mut p {
            *v = v.max(0.0);
        }
        Some(p)
    }

    fn info(&self, p: &[f64]) -> f64 {
        let ny = self.ny();
        let mut i = 0.0;
        for (j, &v) in p.iter().enumerate() {
            if v > 0.0 {
                i += v * (v / (self.px[j / ny] * self.q[j % ny])).ln();
            }
        }
        i
    }

    fn mean(&self, d: &DistortionMatrix, p: &[f64]) -> f64 {
        p.iter().zip(d.values()).map(|(a, b)| a * b).sum()
    }

    /// `(d0, d1)` at a feasible point, `None` otherwise.
    fn eval(&self, z: &[f64], d0_cap: f64) -> Option<(f64, f64)> {
        let p = self.joint(z)?;
        if self.info(&p) > self.cap {
            return None;
        }
        let a = self.mean(self.d0, &p);
        (a <= d0_cap).then(|| (a, self.mean(self.d1, &p)))
    }
}

/// Largest point on the segment from `anchor` towards `z` that `ok` accepts.
/// `anchor` must itself be accepted; the accepted set must be convex.
fn pull(anchor: &[f64], z: &[f64], ok: &(impl Fn(&[f64]) -> bool + Sync)) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { anchor.iter().zip(z).map(|(a, b)| a + t * (b - a)).collect() };
    let full = at(1.0);
    if ok(&full) {
        return full;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Zooming local grid: a full `(2·HALF + 1)^k` grid around the incumbent,
/// recentred on the best accepted point and shrunk threefold whenever a
/// level brings no improvement. With
/// an `anchor`, every grid point is first pulled towards it, which keeps the
/// search inside thin accepted sets.
fn zoom(
    start: &[f64],
    anchor: Option<&[f64]>,
    start_step: f64,
    ok: impl Fn(&[f64]) -> bool + Sync,
    score: impl Fn(&[f64]) -> f64 + Sync,
) -> Vec<f64> {
    const HALF: i64 = 2;
    let k = start.len();
    let side = (2 * HALF + 1) as usize;
    let total = side.pow(k as u32);
    let mut z = match anchor {
        Some(a) => pull(a, start, &ok),
        None => start.to_vec(),
    };
    let mut best = score(&z);
    let mut g = start_step;
    let mut levels = 0;
    while g > 1e-12 && levels < 2_000 {
        levels += 1;
        let center = z.clone();
        let before = best;
        let found = (0..total)
            .into_par_iter()
            .filter_map(|n| {
                let mut rem = n;
                let raw: Vec<f64> = center
                    .iter()
                    .map(|c| {
                        let off = (rem % side) as i64 - HALF;
                        rem /= side;
                        c + off as f64 * g
                    })
                    .collect();
                let cand = match anchor {
                    Some(a) => pull(a, &raw, &ok),
                    None if ok(&raw) => raw,
                    None => return None,
                };
                Some((score(&cand), n, cand))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((v, _, cand)) = found {
            if v < best {
                best = v;
                z = cand;
            }
        }
        if best >= before {
            g /= 3.0;
        }
    }
    z
}

/// Grid oracle for `min E[d0]` over joints with marginals `(px, q)` and
/// `I(X; X̂) ≤ rate`, followed by `max E[d1]` over joints within `tie_slack`
/// of the minimum.
///
/// The grid is enumerated at `step` when it has at most [`MAX_GRID_POINTS`]
/// points and is coarsened otherwise; refinement then runs well below `step`.
pub fn grid_oracle_cc(
    px: &Pmf,
    q: &Pmf,
    d0: &DistortionMatrix,
    d1: &DistortionMatrix,
    rate: Rate,
    step: f64,
    tie_slack: f64,
) -> Result<OracleResult> {
    let (nx, ny) = (px.alphabet_size(), q.alphabet_size());
    if nx < 2 || ny < 2 {
        return Err(usage("grid oracle needs at least two symbols on each side"));
    }
    for d in [d0, d1] {
        if d.rows() != nx || d.cols() != ny {
            return Err(usage("distortion shape does not match the marginals"));
        }
    }
    if !(step > 0.0 && step < 1.0) {
        return Err(usage(format!("grid step {step} must lie in (0, 1)")));
    }
    let inst = Instance {
        px: px.probs(),
        q: q.probs(),
        d0,
        d1,
        cap: rate.in_nats(),
    };
    let k = nx - 1;
    let m = ny - 1;
    let upper: Vec<f64> = (0..k * m).map(|j| inst.px[j / m].min(inst.q[j % m])).collect();
    let count = |h: f64| upper.iter().map(|u| (u / h).floor() + 1.0).product::<f64>();
    let mut h = step;
    while count(h) > MAX_GRID_POINTS as f64 {
        h *= 1.25;
    }
    let axes: Vec<Vec<f64>> = upper
        .iter()
        .map(|&u| {
            let n = (u / h).floor() as usize;
            let mut v: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            if u - n as f64 * h > 1e-12 {
                v.push(u);
            }
            v
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();

    let mut idx = vec![0usize; axes.len()];
    let mut z = vec![0.0; axes.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..total {
        for (j, &i) in idx.iter().enumerate() {
            z[j] = axes[j][i];
        }
        if let Some((a, _)) = inst.eval(&z, f64::INFINITY) {
            if best.as_ref().is_none_or(|(b, _)| a < *b) {
                best = Some((a, z.clone()));
            }
        }
        for j in 0..idx.len() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    // The product law is always feasible.
    let z1 = best.map_or_else(|| (0..k * m).map(|j| inst.px[j / m] * inst.q[j % m]).collect(), |b| b.1);

    let product: Vec<f64> = (0..k * m).map(|j| inst.px[j / m] * inst.q[j % m]).collect();
    let z1 = zoom(
        &z1,
        Some(&product),
        h,
        |z| inst.eval(z, f64::INFINITY).is_some(),
        |z| inst.eval(z, f64::INFINITY).map_or(f64::INFINITY, |v| v.0),
    );
    let d0_star = inst.eval(&z1, f64::INFINITY).map_or(f64::NAN, |v| v.0);

    let cap0 = d0_star + tie_slack;
    let z2 = zoom(
        &z1,
        Some(&z1),
        h,
        |z| inst.eval(z, cap0).is_some(),
        |z| inst.eval(z, cap0).map_or(f64::INFINITY, |v| -v.1),
    );
    let d1_max = inst.eval(&z2, cap0).map_or(f64::NAN, |v| v.1);
    Ok(OracleResult {
        d0_star,
        d1_max,
        step: h,
        grid_points: total,
    })
}

/// A reproducible random constant-composition instance: strictly positive
/// marginals, `d0` zero on the diagonal, arbitrary `d1`, and a rate between
/// 20% and 70% of the smaller marginal entropy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomInstance {
    pub px: Pmf,
    pub q: Pmf,
    pub d0: DistortionMatrix,
    pub d1: DistortionMatrix,
    pub rate: Rate,
}

pub fn random_instance(seed: u64, nx: usize, ny: usize) -> Result<RandomInstance> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut weights = |k: usize| -> Vec<f64> { (0..k).map(|_| 0.2 + rng.random::<f64>()).collect() };
    let px = Pmf::from_weights(&weights(nx))?;
    let q = Pmf::from_weights(&weights(ny))?;
    let e0: Vec<f64> = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
    let e1: Vec<f64> = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
    let d0 = DistortionMatrix::from_fn(nx, ny, |x, y| if x == y { 0.0 } else { 0.2 + e0[x * ny + y] })?;
    let d1 = DistortionMatrix::from_fn(nx, ny, |x, y| e1[x * ny + y])?;
    let frac = 0.2 + 0.5 * rng.random::<f64>();
    let rate = Rate::nats(frac * px.entropy().min(q.entropy()));
    Ok(RandomInstance { px, q, d0, d1, rate })
}
