//! Probability vectors, joint distributions over up to three finite axes,
//! distortion matrices and the information measures built on them.

use crate::error::{domain, usage, Result};
use crate::units::Divergence;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Tolerance on the total mass of a validated distribution.
pub const MASS_TOL: f64 = 1e-12;

/// `p ln p` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `p ln(p / q)` with `0 ln(0/q) = 0` and `p ln(p/0) = +inf`.
#[inline]
pub(crate) fn xlogy(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

fn check_weights(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(usage("empty probability vector"));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(domain(format!("invalid probability {p} at index {i}")));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOL * probs.len().max(4) as f64 {
        return Err(domain(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// A probability mass function over `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_weights(&probs)?;
        Ok(Pmf { probs })
    }

    /// Normalises non-negative weights into a pmf.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(domain("weights must be finite, non-negative, not all zero"));
        }
        Ok(Pmf {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "alphabet must be non-empty");
        Pmf {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| xlogx(p)).sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = crate::error::MrdError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.probs
    }
}

/// Axis labels for joint distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    U,
    Xhat,
    Xhat1,
    Xhat2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Nested {
    Matrix(Vec<Vec<f64>>),
    Tensor(Vec<Vec<Vec<f64>>>),
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    axes: Vec<Axis>,
    probs: Nested,
}

/// A joint pmf over two or three finite axes, stored densely in row-major
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointPmf {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    /// Validated constructor from flat row-major storage.
    pub fn from_flat(axes: Vec<Axis>, shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::check_layout(&axes, &shape, &probs)?;
        check_weights(&probs)?;
        Ok(JointPmf { axes, shape, probs })
    }

    /// Like [`JointPmf::from_flat`] but renormalises the mass; for solver
    /// outputs whose rounding error may exceed the strict tolerance.
    pub fn from_flat_normalized(
        axes: Vec<Axis>,
        shape: Vec<usize>,
        mut probs: Vec<f64>,
    ) -> Result<Self> {
        Self::check_layout(&axes, &shape, &probs)?;
        for p in probs.iter_mut() {
            if *p < 0.0 && *p > -1e-300 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain("joint weights must be finite and non-negative"));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(JointPmf { axes, shape, probs })
    }

    pub fn from_matrix(axes: [Axis; 2], rows: &[Vec<f64>]) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(usage("ragged matrix"));
        }
        Self::from_flat(axes.to_vec(), vec![nr, nc], rows.concat())
    }

    /// The product `px × q`.
    pub fn product(px: &Pmf, q: &Pmf) -> Self {
        let probs = px
            .probs()
            .iter()
            .flat_map(|&a| q.probs().iter().map(move |&b| a * b))
            .collect();
        JointPmf {
            axes: vec![Axis::X, Axis::Xhat],
            shape: vec![px.alphabet_size(), q.alphabet_size()],
            probs,
        }
    }

    fn check_layout(axes: &[Axis], shape: &[usize], probs: &[f64]) -> Result<()> {
        if !(2..=3).contains(&axes.len()) || axes.len() != shape.len() {
            return Err(usage("joint pmf needs two or three labelled axes"));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(usage(format!("duplicate axis {a:?}")));
            }
        }
        if shape.iter().any(|&s| s == 0) || shape.iter().product::<usize>() != probs.len() {
            return Err(usage("shape does not match storage"));
        }
        Ok(())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    fn position(&self, axis: Axis) -> Result<usize> {
        self.axes
            .iter()
            .position(|&a| a == axis)
            .ok_or_else(|| usage(format!("axis {axis:?} not present in {:?}", self.axes)))
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len() - 1).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    /// Multi-index of a flat storage offset.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for i in (0..self.shape.len()).rev() {
            idx[i] = flat % self.shape[i];
            flat /= self.shape[i];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let off: usize = idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.probs[off]
    }

    /// Exact marginal over a single axis.
    pub fn marginal(&self, axis: Axis) -> Result<Vec<f64>> {
        let pos = self.position(axis)?;
        let mut m = vec![0.0; self.shape[pos]];
        for (flat, &p) in self.probs.iter().enumerate() {
            m[self.unravel(flat)[pos]] += p;
        }
        Ok(m)
    }

    /// Collapses the joint onto a (left group, right group) matrix. Each group
    /// is flattened row-major in the order given.
    pub fn grouped(&self, left: &[Axis], right: &[Axis]) -> Result<Vec<Vec<f64>>> {
        if left.is_empty() || right.is_empty() {
            return Err(usage("both sides of an axis grouping must be non-empty"));
        }
        let lp: Vec<usize> = left.iter().map(|&a| self.position(a)).collect::<Result<_>>()?;
        let rp: Vec<usize> = right.iter().map(|&a| self.position(a)).collect::<Result<_>>()?;
        if lp.iter().any(|p| rp.contains(p)) {
            return Err(usage("axis appears on both sides of the grouping"));
        }
        for (i, p) in lp.iter().chain(rp.iter()).enumerate() {
            if lp.iter().chain(rp.iter()).take(i).any(|q| q == p) {
                return Err(usage("axis listed twice in grouping"));
            }
        }
        let size = |ps: &[usize]| ps.iter().map(|&p| self.shape[p]).product::<usize>();
        let flat = |idx: &[usize], ps: &[usize]| {
            ps.iter().fold(0usize, |acc, &p| acc * self.shape[p] + idx[p])
        };
        let mut m = vec![vec![0.0; size(&rp)]; size(&lp)];
        for (off, &p) in self.probs.iter().enumerate() {
            let idx = self.unravel(off);
            m[flat(&idx, &lp)][flat(&idx, &rp)] += p;
        }
        Ok(m)
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &JointPmf, alpha: f64) -> Result<JointPmf> {
        if self.axes != other.axes || self.shape != other.shape {
            return Err(usage("mixing joints with different layouts"));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        JointPmf::from_flat_normalized(self.axes.clone(), self.shape.clone(), probs)
    }
}

impl TryFrom<JointRepr> for JointPmf {
    type Error = crate::error::MrdError;
    fn try_from(r: JointRepr) -> Result<Self> {
        match r.probs {
            Nested::Matrix(rows) => {
                let nc = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|x| x.len() != nc) {
                    return Err(usage("ragged matrix"));
                }
                JointPmf::from_flat(r.axes, vec![rows.len(), nc], rows.concat())
            }
            Nested::Tensor(t) => {
                let n1 = t.first().map_or(0, Vec::len);
                let n2 = t.first().and_then(|m| m.first()).map_or(0, Vec::len);
                if t.iter().any(|m| m.len() != n1 || m.iter().any(|x| x.len() != n2)) {
                    return Err(usage("ragged tensor"));
                }
                let flat = t.into_iter().flatten().flatten().collect::<Vec<_>>();
                let n0 = flat.len() / (n1 * n2).max(1);
                JointPmf::from_flat(r.axes, vec![n0, n1, n2], flat)
            }
        }
    }
}

impl From<JointPmf> for JointRepr {
    fn from(j: JointPmf) -> Self {
        let probs = match j.shape.as_slice() {
            [_, c] => Nested::Matrix(j.probs.chunks(*c).map(<[f64]>::to_vec).collect()),
            [_, b, c] => Nested::Tensor(
                j.probs
                    .chunks(b * c)
                    .map(|m| m.chunks(*c).map(<[f64]>::to_vec).collect())
                    .collect(),
            ),
            _ => unreachable!("validated at construction"),
        };
        JointRepr { axes: j.axes, probs }
    }
}

/// A non-negative, finite distortion matrix indexed `(x, xhat)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistortionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
            return Err(usage("distortion matrix must be a non-empty rectangle"));
        }
        let values = rows.concat();
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain("distortion entries must be finite and non-negative"));
        }
        Ok(DistortionMatrix {
            rows: nr,
            cols: nc,
            values,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(
            (0..rows)
                .map(|x| (0..cols).map(|y| f(x, y)).collect())
                .collect(),
        )
    }

    pub fn hamming(n: usize) -> Self {
        Self::from_fn(n, n, |x, y| f64::from(u8::from(x != y))).expect("valid by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.values[x * self.cols + xhat]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for DistortionMatrix {
    type Error = crate::error::MrdError;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        DistortionMatrix::new(v)
    }
}

impl From<DistortionMatrix> for Vec<Vec<f64>> {
    fn from(d: DistortionMatrix) -> Self {
        d.values.chunks(d.cols).map(<[f64]>::to_vec).collect()
    }
}

/// A map `psi: X1 × X2 → Xhat` stored as a lookup table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Psi {
    pub table: Vec<Vec<usize>>,
    pub output_size: usize,
}

impl Psi {
    pub fn new(table: Vec<Vec<usize>>, output_size: usize) -> Result<Self> {
        let n2 = table.first().map_or(0, Vec::len);
        if table.is_empty() || n2 == 0 || table.iter().any(|r| r.len() != n2) {
            return Err(usage("psi table must be a non-empty rectangle"));
        }
        if table.iter().flatten().any(|&v| v >= output_size) {
            return Err(usage("psi maps outside its output alphabet"));
        }
        Ok(Psi { table, output_size })
    }

    /// `psi(x1, x2) = x1`.
    pub fn first(n1: usize, n2: usize) -> Self {
        Psi {
            table: (0..n1).map(|a| vec![a; n2]).collect(),
            output_size: n1,
        }
    }

    /// `psi(x1, x2) = x2`.
    pub fn second(n1: usize, n2: usize) -> Self {
        Psi {
            table: vec![(0..n2).collect(); n1],
            output_size: n2,
        }
    }

    /// `psi(x1, x2) = (x1, x2)` flattened as `x1 * n2 + x2`.
    pub fn pair(n1: usize, n2: usize) -> Self {
        Psi {
            table: (0..n1).map(|a| (0..n2).map(|b| a * n2 + b).collect()).collect(),
            output_size: n1 * n2,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.table.len(), self.table[0].len())
    }

    #[inline]
    pub fn apply(&self, x1: usize, x2: usize) -> usize {
        self.table[x1][x2]
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(domain(format!("binary entropy needs a in [0,1], got {a}")));
    }
    Ok(h2_bits(a))
}

#[inline]
pub(crate) fn h2_bits(a: f64) -> f64 {
    -(xlogx(a) + xlogx(1.0 - a)) / LN_2
}

/// Entropy in bits of `(a, b, 1 - a - b)`.
pub fn ternary_entropy(a: f64, b: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 || a + b > 1.0 + 1e-15 {
        return Err(domain(format!("({a}, {b}) is not a sub-probability pair")));
    }
    let c = (1.0 - a - b).max(0.0);
    Ok(-(xlogx(a) + xlogx(b) + xlogx(c)) / LN_2)
}

/// `D(joint ‖ px × q)`.
pub fn kl_to_product(joint: &JointPmf, px: &Pmf, q: &Pmf) -> Result<Divergence> {
    if joint.ndim() != 2 {
        return Err(usage("kl_to_product needs a two-axis joint"));
    }
    let (nr, nc) = (joint.shape()[0], joint.shape()[1]);
    if nr != px.alphabet_size() || nc != q.alphabet_size() {
        return Err(usage("marginal sizes do not match the joint"));
    }
    let mut d = 0.0;
    for x in 0..nr {
        for y in 0..nc {
            d += xlogy(joint.probs()[x * nc + y], px.get(x) * q.get(y));
        }
    }
    Ok(Divergence::from_nats(d.max(0.0)))
}

/// Mutual information in nats of a (rows, cols) joint given as a matrix.
pub(crate) fn mutual_info_matrix(m: &[Vec<f64>]) -> f64 {
    let nc = m.first().map_or(0, Vec::len);
    let row: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..nc).map(|j| m.iter().map(|r| r[j]).sum()).collect();
    let mut i = 0.0;
    for (r, &pr) in m.iter().zip(&row) {
        for (&p, &pc) in r.iter().zip(&col) {
            if p > 0.0 {
                i += p * (p / (pr * pc)).ln();
            }
        }
    }
    i.max(0.0)
}

/// Mutual information between two groups of axes.
pub fn mutual_info(joint: &JointPmf, left: &[Axis], right: &[Axis]) -> Result<Divergence> {
    let m = joint.grouped(left, right)?;
    Ok(Divergence::from_nats(mutual_info_matrix(&m)))
}

/// Expected distortion. Two-axis joints index `d` directly; three-axis joints
/// read the reconstruction through `psi` over `(Xhat1, Xhat2)`, or through
/// the last axis when the middle axis is the cloud label `U`.
pub fn expected_distortion(
    joint: &JointPmf,
    d: &DistortionMatrix,
    psi: Option<&Psi>,
) -> Result<f64> {
    let shape = joint.shape();
    match (joint.axes(), psi) {
        (_, _) if joint.ndim() == 2 => {
            if shape[0] != d.rows() || shape[1] != d.cols() {
                return Err(usage("distortion matrix shape does not match the joint"));
            }
            Ok(joint
                .probs()
                .iter()
                .zip(d.values())
                .map(|(p, v)| p * v)
                .sum())
        }
        ([Axis::X, Axis::U, Axis::Xhat], None) => {
            if shape[0] != d.rows() || shape[2] != d.cols() {
                return Err(usage("distortion matrix shape does not match the joint"));
            }
            Ok(joint
                .probs()
                .iter()
                .enumerate()
                .map(|(off, p)| {
                    let i = joint.unravel(off);
                    p * d.get(i[0], i[2])
                })
                .sum())
        }
        ([Axis::X, Axis::Xhat1, Axis::Xhat2], Some(psi)) => {
            if psi.dims() != (shape[1], shape[2]) || psi.output_size != d.cols() || shape[0] != d.rows() {
                return Err(usage("psi or distortion shape does not match the joint"));
            }
            Ok(joint
                .probs()
                .iter()
                .enumerate()
                .map(|(off, p)| {
                    let i = joint.unravel(off);
                    p * d.get(i[0], psi.apply(i[1], i[2]))
                })
                .sum())
        }
        _ => Err(usage(
            "three-axis joints need axes (X,U,Xhat), or (X,Xhat1,Xhat2) with a psi map",
        )),
    }
}
