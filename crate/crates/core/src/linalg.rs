//! Dense symmetric solves for the small Newton systems of the solvers.

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub(crate) struct Sym {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Sym {
    pub fn zeros(n: usize) -> Self {
        Sym { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }
}

/// Cholesky factor `L` of a positive semi-definite matrix. Pivots that fall
/// below `rel_tol` times the largest diagonal are treated as exact zeros, so
/// consistent systems with redundant rows still solve (minimum-effort
/// solution on the null space).
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    skipped: Vec<bool>,
}

impl Cholesky {
    pub fn new(m: &Sym, rel_tol: f64) -> Self {
        let n = m.n;
        let max_diag = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
        let floor = rel_tol * max_diag.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        let mut skipped = vec![false; n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= floor {
                skipped[j] = true;
                continue;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Cholesky { n, l, skipped }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            if self.skipped[i] {
                y[i] = 0.0;
                continue;
            }
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            if self.skipped[i] {
                y[i] = 0.0;
                continue;
            }
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd() {
        let mut m = Sym::zeros(3);
        let vals = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        m.a.copy_from_slice(&vals);
        let x = Cholesky::new(&m, 1e-14).solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| vals[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn redundant_rows() {
        // Rank-one matrix with a consistent right-hand side.
        let mut m = Sym::zeros(2);
        m.a.copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
        let x = Cholesky::new(&m, 1e-12).solve(&[2.0, 2.0]);
        assert!((x[0] + x[1] - 2.0).abs() < 1e-12);
    }
}
