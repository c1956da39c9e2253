//! Log-domain iterative proportional fitting.
//!
//! A kernel `K` over cells is scaled by one potential per linear marginal
//! constraint until every constrained marginal hits its target. With the two
//! projections "row" and "column" this is plain Sinkhorn scaling.

use crate::error::{MrdError, Result};

/// One marginal constraint: each cell belongs to one bucket, and the mass of
/// every bucket must equal `exp(log_target[bucket])`.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    pub bucket: Vec<usize>,
    pub log_target: Vec<f64>,
}

impl Projection {
    pub fn new(bucket: Vec<usize>, target: &[f64]) -> Self {
        Projection {
            bucket,
            log_target: target.iter().map(|t| t.ln()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Scaler {
    projections: Vec<Projection>,
    potentials: Vec<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

#[inline]
fn log_sum_exp_buckets(logp: &[f64], bucket: &[usize], n: usize, out: &mut [f64]) {
    let mut m = vec![f64::NEG_INFINITY; n];
    for (&lp, &b) in logp.iter().zip(bucket) {
        if lp > m[b] {
            m[b] = lp;
        }
    }
    let mut s = vec![0.0; n];
    for (&lp, &b) in logp.iter().zip(bucket) {
        if lp > f64::NEG_INFINITY {
            s[b] += (lp - m[b]).exp();
        }
    }
    for b in 0..n {
        out[b] = if m[b] == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            m[b] + s[b].ln()
        };
    }
}

impl Scaler {
    pub fn new(projections: Vec<Projection>) -> Self {
        let potentials = projections
            .iter()
            .map(|p| vec![0.0; p.log_target.len()])
            .collect();
        Scaler {
            projections,
            potentials,
            tol: 1e-13,
            max_iter: 50_000,
        }
    }

    pub fn reset(&mut self) {
        for p in &mut self.potentials {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Scales `logk` in place of a warm start from the stored potentials and
    /// returns the log of the fitted joint.
    pub fn fit(&mut self, logk: &[f64]) -> Result<Vec<f64>> {
        let mut logp: Vec<f64> = logk.to_vec();
        for (proj, pot) in self.projections.iter().zip(&self.potentials) {
            for (lp, &b) in logp.iter_mut().zip(&proj.bucket) {
                *lp += pot[b];
            }
        }
        if self.potentials.iter().flatten().any(|v| !v.is_finite()) {
            self.reset();
            logp = logk.to_vec();
        }
        let np = self.projections.len();
        let mut lse: Vec<Vec<f64>> = self
            .projections
            .iter()
            .map(|p| vec![0.0; p.log_target.len()])
            .collect();
        let mut residual = f64::INFINITY;
        for iter in 0..self.max_iter {
            for k in 0..np {
                let proj = &self.projections[k];
                let n = proj.log_target.len();
                log_sum_exp_buckets(&logp, &proj.bucket, n, &mut lse[k]);
                let mut delta = vec![0.0; n];
                for b in 0..n {
                    if lse[k][b] == f64::NEG_INFINITY {
                        return Err(MrdError::Usage(
                            "kernel has no support on a constrained marginal cell".into(),
                        ));
                    }
                    delta[b] = proj.log_target[b] - lse[k][b];
                    self.potentials[k][b] += delta[b];
                }
                for (lp, &b) in logp.iter_mut().zip(&proj.bucket) {
                    *lp += delta[b];
                }
            }
            // The last projection is exact after its update; measure the rest.
            residual = 0.0;
            for k in 0..np - 1 {
                let proj = &self.projections[k];
                let n = proj.log_target.len();
                log_sum_exp_buckets(&logp, &proj.bucket, n, &mut lse[k]);
                for b in 0..n {
                    residual += (lse[k][b].exp() - proj.log_target[b].exp()).abs();
                }
            }
            if residual <= self.tol {
                log::trace!("ipf converged in {} sweeps, residual {residual:.2e}", iter + 1);
                return Ok(logp);
            }
        }
        Err(MrdError::Convergence {
            context: "marginal scaling".into(),
            iterations: self.max_iter,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinkhorn_marginals() {
        let (nx, nv) = (3, 4);
        let px = [0.2, 0.5, 0.3];
        let qv = [0.1, 0.2, 0.3, 0.4];
        let logk: Vec<f64> = (0..nx * nv).map(|c| -((c * 7 % 5) as f64)).collect();
        let mut s = Scaler::new(vec![
            Projection::new((0..nx * nv).map(|c| c / nv).collect(), &px),
            Projection::new((0..nx * nv).map(|c| c % nv).collect(), &qv),
        ]);
        let logp = s.fit(&logk).unwrap();
        for x in 0..nx {
            let r: f64 = (0..nv).map(|v| logp[x * nv + v].exp()).sum();
            assert!((r - px[x]).abs() < 1e-12);
        }
        for v in 0..nv {
            let c: f64 = (0..nx).map(|x| logp[x * nv + v].exp()).sum();
            assert!((c - qv[v]).abs() < 1e-12);
        }
    }
}
