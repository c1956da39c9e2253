//! i.i.d. bounds for general alphabets through the log-MGF
//! `Λ(λ) = E_Π[log E_Q[e^{λ d0(X, X̂)}]]`.
//!
//! For `D0` strictly between the essential minimum and the product level, the
//! d0-optimal joint is the exponential tilt of `Π × Q` at the unique `λ* ≤ 0`
//! with `Λ'(λ*) = D0`, the rate is `λ* D0 − Λ(λ*)` and the mismatched
//! distortion is the tilted mean of `d1`. The tie set is a singleton below
//! `R_max`, so no tie rule enters.

use crate::closed_form::sign_disagreement;
use crate::ensembles::{CurvePoint, EnsembleKind, TieRule};
use crate::error::{domain, MrdError, Result};
use crate::prob::{DistortionMatrix, Pmf};
use crate::units::Rate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

const ROOT_ITERS: usize = 400;

/// A source/codeword pair with two distortion measures, seen through `Λ`.
pub trait GeneralModel: Send + Sync {
    /// `E_{Π×Q}[d0]`.
    fn d0_prod(&self) -> f64;
    /// `E_{Π×Q}[d1]`.
    fn d1_prod(&self) -> f64;
    /// `E_Π[ess inf_{X̂∼Q} d0(X, X̂)]`.
    fn d0_min(&self) -> f64;
    /// `Λ(λ)` in nats, for `λ ≤ 0`.
    fn log_mgf(&self, lambda: f64) -> Result<f64>;
    /// `Λ'(λ)`, which is also the tilted mean of `d0`.
    fn log_mgf_derivative(&self, lambda: f64) -> Result<f64> {
        finite_difference_derivative(self, lambda)
    }
    /// Tilted mean of `d1` at `λ`.
    fn tilted_d1(&self, lambda: f64) -> Result<f64>;
    /// Closed-form `R_max`, when the model knows it.
    fn r_max_override(&self) -> Option<Rate> {
        None
    }
    /// Residual tolerance on `Λ'` for root finding.
    fn root_tol(&self) -> f64 {
        1e-10
    }
    fn is_sampled(&self) -> bool {
        false
    }
}

/// Central difference for `Λ'`, with the step scaled to `|λ|` and a one-sided
/// step at `λ = 0`.
pub fn finite_difference_derivative<M: GeneralModel + ?Sized>(model: &M, lambda: f64) -> Result<f64> {
    let h = 1e-5 * lambda.abs().max(1e-2);
    if lambda + h > 0.0 {
        let (f0, f1, f2) = (model.log_mgf(lambda)?, model.log_mgf(lambda - h)?, model.log_mgf(lambda - 2.0 * h)?);
        return Ok((3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h));
    }
    Ok((model.log_mgf(lambda + h)? - model.log_mgf(lambda - h)?) / (2.0 * h))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda <= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("λ = {lambda} must be finite and non-positive")))
    }
}

/// Finite alphabets, evaluated exactly.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    px: Pmf,
    q: Pmf,
    d0: DistortionMatrix,
    d1: DistortionMatrix,
}

impl DiscreteModel {
    pub fn new(px: Pmf, q: Pmf, d0: DistortionMatrix, d1: DistortionMatrix) -> Result<Self> {
        let (nx, ny) = (px.alphabet_size(), q.alphabet_size());
        for d in [&d0, &d1] {
            if d.rows() != nx || d.cols() != ny {
                return Err(crate::error::usage(format!(
                    "distortion is {}x{}, expected {nx}x{ny}",
                    d.rows(),
                    d.cols()
                )));
            }
        }
        Ok(DiscreteModel { px, q, d0, d1 })
    }

    /// Per-source-symbol tilted conditional of `X̂`.
    fn tilt_row(&self, x: usize, lambda: f64) -> (f64, Vec<f64>) {
        let ny = self.q.alphabet_size();
        let exps: Vec<f64> = (0..ny)
            .map(|y| if self.q.get(y) > 0.0 { lambda * self.d0.get(x, y) } else { f64::NEG_INFINITY })
            .collect();
        let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = (0..ny).map(|y| self.q.get(y) * (exps[y] - m).exp()).collect();
        let z: f64 = w.iter().sum();
        (m + z.ln(), w.into_iter().map(|v| v / z).collect())
    }

    fn tilted_mean(&self, d: &DistortionMatrix, lambda: f64) -> f64 {
        (0..self.px.alphabet_size())
            .filter(|&x| self.px.get(x) > 0.0)
            .map(|x| {
                let (_, w) = self.tilt_row(x, lambda);
                self.px.get(x) * w.iter().enumerate().map(|(y, v)| v * d.get(x, y)).sum::<f64>()
            })
            .sum()
    }

    fn prod_mean(&self, d: &DistortionMatrix) -> f64 {
        let mut s = 0.0;
        for x in 0..self.px.alphabet_size() {
            for y in 0..self.q.alphabet_size() {
                s += self.px.get(x) * self.q.get(y) * d.get(x, y);
            }
        }
        s
    }

    fn row_min(&self, x: usize) -> f64 {
        (0..self.q.alphabet_size())
            .filter(|&y| self.q.get(y) > 0.0)
            .map(|y| self.d0.get(x, y))
            .fold(f64::INFINITY, f64::min)
    }
}

impl GeneralModel for DiscreteModel {
    fn d0_prod(&self) -> f64 {
        self.prod_mean(&self.d0)
    }

    fn d1_prod(&self) -> f64 {
        self.prod_mean(&self.d1)
    }

    fn d0_min(&self) -> f64 {
        (0..self.px.alphabet_size())
            .filter(|&x| self.px.get(x) > 0.0)
            .map(|x| self.px.get(x) * self.row_min(x))
            .sum()
    }

    fn log_mgf(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok((0..self.px.alphabet_size())
            .filter(|&x| self.px.get(x) > 0.0)
            .map(|x| self.px.get(x) * self.tilt_row(x, lambda).0)
            .sum())
    }

    fn log_mgf_derivative(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(self.tilted_mean(&self.d0, lambda))
    }

    fn tilted_d1(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(self.tilted_mean(&self.d1, lambda))
    }

    /// As `λ → −∞` the tilt concentrates on the per-symbol minimisers, and
    /// the rate tends to `E_Π[−log Q(argmin d0(X, ·))]`.
    fn r_max_override(&self) -> Option<Rate> {
        let r = (0..self.px.alphabet_size())
            .filter(|&x| self.px.get(x) > 0.0)
            .map(|x| {
                let m = self.row_min(x);
                let mass: f64 = (0..self.q.alphabet_size())
                    .filter(|&y| self.q.get(y) > 0.0 && self.d0.get(x, y) <= m + 1e-12 * m.abs().max(1.0))
                    .map(|y| self.q.get(y))
                    .sum();
                -self.px.get(x) * mass.ln()
            })
            .sum();
        Some(Rate::nats(r))
    }
}

/// The true distortion paired with squared-error encoding of a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianD1 {
    /// `d1 = d0`.
    Quadratic,
    /// `d1 = [sign(x) ≠ sign(x̂)]`.
    Sign,
}

/// `X ~ N(0, σ²)`, `X̂ ~ N(0, τ²)` i.i.d., `d0 = (x − x̂)²`.
///
/// Under the tilt `X` keeps its law and `X̂ | X = x ~ N(k x, v)` with
/// `b = 1/(2τ²) − λ`, `k = −λ/b`, `v = 1/(2b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    pub sigma2: f64,
    pub tau2: f64,
    pub d1: GaussianD1,
}

impl GaussianModel {
    pub fn quadratic(sigma2: f64, tau2: f64) -> Result<Self> {
        Self::new(sigma2, tau2, GaussianD1::Quadratic)
    }

    pub fn sign(sigma2: f64, tau2: f64) -> Result<Self> {
        Self::new(sigma2, tau2, GaussianD1::Sign)
    }

    fn new(sigma2: f64, tau2: f64, d1: GaussianD1) -> Result<Self> {
        if !(sigma2 > 0.0 && tau2 > 0.0 && sigma2.is_finite() && tau2.is_finite()) {
            return Err(domain(format!("variances must be positive, got σ² = {sigma2}, τ² = {tau2}")));
        }
        Ok(GaussianModel { sigma2, tau2, d1 })
    }

    /// Correlation of `(X, X̂)` under the tilt at `λ`.
    pub fn tilted_rho(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let b = 1.0 / (2.0 * self.tau2) - lambda;
        let k = -lambda / b;
        let v = 1.0 / (2.0 * b);
        let cov = k * self.sigma2;
        Ok(cov / (self.sigma2 * (k * k * self.sigma2 + v)).sqrt())
    }
}

impl GeneralModel for GaussianModel {
    fn d0_prod(&self) -> f64 {
        self.sigma2 + self.tau2
    }

    fn d1_prod(&self) -> f64 {
        match self.d1 {
            GaussianD1::Quadratic => self.sigma2 + self.tau2,
            GaussianD1::Sign => 0.5,
        }
    }

    fn d0_min(&self) -> f64 {
        0.0
    }

    fn log_mgf(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let s = 1.0 - 2.0 * lambda * self.tau2;
        Ok(-0.5 * s.ln() + lambda * self.sigma2 / s)
    }

    fn log_mgf_derivative(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let s = 1.0 - 2.0 * lambda * self.tau2;
        Ok(self.tau2 / s + self.sigma2 / (s * s))
    }

    fn tilted_d1(&self, lambda: f64) -> Result<f64> {
        match self.d1 {
            GaussianD1::Quadratic => self.log_mgf_derivative(lambda),
            GaussianD1::Sign => Ok(sign_disagreement(self.tilted_rho(lambda)?)),
        }
    }

    fn r_max_override(&self) -> Option<Rate> {
        Some(Rate::nats(f64::INFINITY))
    }
}

type Sampler = Arc<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync>;
type Metric = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Sample sizes and noise budget for [`SampledModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingBudget {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Largest tolerated standard error of the `Λ` estimate, in nats.
    pub max_std_error: f64,
}

impl Default for SamplingBudget {
    fn default() -> Self {
        SamplingBudget {
            n_outer: 10_000,
            n_inner: 1_000,
            max_std_error: 0.05,
        }
    }
}

/// Real-valued source and codeword laws known only through samplers.
///
/// A source sample set and one shared codeword cloud are drawn once at
/// construction. Every quantity is then the exact value for the empirical
/// laws: `Λ` is a mean of per-sample log-mean-exps, and tilted expectations
/// use self-normalised weights `∝ e^{λ d0(x, x̂)}` over the cloud. Sharing the
/// cloud keeps the estimate convex and smooth in `λ`, so root finding sees no
/// sampling jitter.
#[derive(Clone)]
pub struct SampledModel {
    xs: Vec<f64>,
    cloud: Vec<f64>,
    d0: Metric,
    d1: Metric,
    budget: SamplingBudget,
    d0_prod: f64,
    d1_prod: f64,
    d0_min: f64,
}

impl std::fmt::Debug for SampledModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledModel")
            .field("n_outer", &self.xs.len())
            .field("n_inner", &self.cloud.len())
            .field("d0_prod", &self.d0_prod)
            .field("d0_min", &self.d0_min)
            .finish()
    }
}

impl SampledModel {
    pub fn new(
        source: impl Fn(&mut ChaCha8Rng) -> f64 + Send + Sync + 'static,
        codeword: impl Fn(&mut ChaCha8Rng) -> f64 + Send + Sync + 'static,
        d0: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        budget: SamplingBudget,
        seed: u64,
    ) -> Result<Self> {
        if budget.n_outer < 2 || budget.n_inner < 1 {
            return Err(crate::error::usage("sampled model needs n_outer >= 2 and n_inner >= 1"));
        }
        let source: Sampler = Arc::new(source);
        let codeword: Sampler = Arc::new(codeword);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..budget.n_outer).map(|_| source(&mut rng)).collect();
        let cloud: Vec<f64> = (0..budget.n_inner).map(|_| codeword(&mut rng)).collect();
        let mut model = SampledModel {
            xs,
            cloud,
            d0: Arc::new(d0),
            d1: Arc::new(d1),
            budget,
            d0_prod: 0.0,
            d1_prod: 0.0,
            d0_min: 0.0,
        };
        let stats: Vec<(f64, f64, f64)> = model
            .xs
            .par_iter()
            .map(|&x| {
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                let mut lo = f64::INFINITY;
                for &y in &model.cloud {
                    let v = (model.d0)(x, y);
                    s0 += v;
                    s1 += (model.d1)(x, y);
                    lo = lo.min(v);
                }
                (s0, s1, lo)
            })
            .collect();
        let n = model.cloud.len() as f64;
        let m = model.xs.len() as f64;
        model.d0_prod = stats.iter().map(|s| s.0).sum::<f64>() / (n * m);
        model.d1_prod = stats.iter().map(|s| s.1).sum::<f64>() / (n * m);
        model.d0_min = stats.iter().map(|s| s.2).sum::<f64>() / m;
        if !(model.d0_prod.is_finite() && model.d1_prod.is_finite()) {
            return Err(domain("product-law distortions must be finite"));
        }
        Ok(model)
    }

    /// Gaussian source and codewords with squared-error `d0` and sign `d1`,
    /// mainly for checking the sampled path against [`GaussianModel`].
    pub fn gaussian_sign(sigma2: f64, tau2: f64, budget: SamplingBudget, seed: u64) -> Result<Self> {
        GaussianModel::sign(sigma2, tau2)?;
        let (s, t) = (sigma2.sqrt(), tau2.sqrt());
        Self::new(
            move |r| s * r.sample::<f64, _>(rand_distr::StandardNormal),
            move |r| t * r.sample::<f64, _>(rand_distr::StandardNormal),
            |x, y| (x - y) * (x - y),
            |x, y| f64::from(u8::from((x >= 0.0) != (y >= 0.0))),
            budget,
            seed,
        )
    }

    /// Per-sample `(log mean e^{λ d0}, tilted d0, tilted d1)`.
    fn per_sample(&self, lambda: f64) -> Vec<(f64, f64, f64)> {
        self.xs
            .par_iter()
            .map(|&x| {
                let e: Vec<f64> = self.cloud.iter().map(|&y| lambda * (self.d0)(x, y)).collect();
                let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut z, mut a0, mut a1) = (0.0, 0.0, 0.0);
                for (&y, &ei) in self.cloud.iter().zip(&e) {
                    let w = (ei - m).exp();
                    z += w;
                    a0 += w * (self.d0)(x, y);
                    a1 += w * (self.d1)(x, y);
                }
                (m + (z / self.cloud.len() as f64).ln(), a0 / z, a1 / z)
            })
            .collect()
    }

    /// Standard error of the outer average in `Λ(λ)`.
    pub fn log_mgf_std_error(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let g: Vec<f64> = self.per_sample(lambda).into_iter().map(|s| s.0).collect();
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok((var / n).sqrt())
    }
}

impl GeneralModel for SampledModel {
    fn d0_prod(&self) -> f64 {
        self.d0_prod
    }

    fn d1_prod(&self) -> f64 {
        self.d1_prod
    }

    fn d0_min(&self) -> f64 {
        self.d0_min
    }

    fn log_mgf(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let g: Vec<f64> = self.per_sample(lambda).into_iter().map(|s| s.0).collect();
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        if se > self.budget.max_std_error {
            return Err(MrdError::SamplingBudget(format!(
                "standard error {se:.3e} nats at λ = {lambda} exceeds {:.3e}; raise n_outer",
                self.budget.max_std_error
            )));
        }
        Ok(mean)
    }

    fn log_mgf_derivative(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let s = self.per_sample(lambda);
        Ok(s.iter().map(|v| v.1).sum::<f64>() / s.len() as f64)
    }

    fn tilted_d1(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let s = self.per_sample(lambda);
        Ok(s.iter().map(|v| v.2).sum::<f64>() / s.len() as f64)
    }

    fn root_tol(&self) -> f64 {
        1e-6
    }

    fn is_sampled(&self) -> bool {
        true
    }
}

/// How the tilted joint is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltRepresentation {
    /// Evaluated exactly (finite alphabets or closed form).
    Exact,
    /// Self-normalised weights over a sample cloud.
    Weighted,
}

/// The d0-optimal tilt at a given `D0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedJoint {
    pub lambda_star: f64,
    /// `Λ'(λ*)`.
    pub d0_value: f64,
    pub representation: TiltRepresentation,
}

/// `Λ(λ)` in nats.
pub fn log_mgf<M: GeneralModel + ?Sized>(model: &M, lambda: f64) -> Result<f64> {
    model.log_mgf(lambda)
}

fn representation<M: GeneralModel + ?Sized>(model: &M) -> TiltRepresentation {
    if model.is_sampled() {
        TiltRepresentation::Weighted
    } else {
        TiltRepresentation::Exact
    }
}

/// `λ*` with `Λ'(λ*) = D0`, by bracketing and bisection on the increasing `Λ'`.
pub fn solve_lambda_star<M: GeneralModel + ?Sized>(model: &M, d0: f64) -> Result<TiltedJoint> {
    let (lo_level, hi_level) = (model.d0_min(), model.d0_prod());
    if !(d0.is_finite() && d0 > lo_level && d0 <= hi_level) {
        return Err(domain(format!(
            "D0 = {d0} is outside the admissible interval ({lo_level}, {hi_level})"
        )));
    }
    let rep = representation(model);
    let tol = model.root_tol();
    if d0 >= hi_level {
        return Ok(TiltedJoint {
            lambda_star: 0.0,
            d0_value: model.log_mgf_derivative(0.0)?,
            representation: rep,
        });
    }
    let mut lo = -1.0 / (hi_level - lo_level).max(1e-300);
    while model.log_mgf_derivative(lo)? > d0 {
        lo *= 4.0;
        if lo < -1e300 {
            return Err(MrdError::Convergence {
                context: format!("no λ brackets D0 = {d0}"),
                iterations: 0,
                residual: f64::NAN,
            });
        }
    }
    let mut hi = 0.0;
    let mut mid = 0.5 * lo;
    for _ in 0..ROOT_ITERS {
        mid = 0.5 * (lo + hi);
        let g = model.log_mgf_derivative(mid)? - d0;
        if g.abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TiltedJoint {
        lambda_star: mid,
        d0_value: model.log_mgf_derivative(mid)?,
        representation: rep,
    })
}

fn rate_at<M: GeneralModel + ?Sized>(model: &M, lambda: f64) -> Result<f64> {
    Ok((lambda * model.log_mgf_derivative(lambda)? - model.log_mgf(lambda)?).max(0.0))
}

/// `R(D0) = λ* D0 − Λ(λ*)`.
pub fn rate_from_d0<M: GeneralModel + ?Sized>(model: &M, d0: f64) -> Result<Rate> {
    let t = solve_lambda_star(model, d0)?;
    if t.lambda_star == 0.0 {
        return Ok(Rate::ZERO);
    }
    Ok(Rate::nats((t.lambda_star * d0 - model.log_mgf(t.lambda_star)?).max(0.0)))
}

/// `R_max`, the rate as `D0` decreases to the essential minimum.
///
/// Models with a closed form supply it. Otherwise the rate is evaluated along
/// `D0 = min + (prod − min)·2^{−k}`; when successive increments shrink
/// geometrically the tail is summed, and when they do not the limit is
/// reported as infinite.
pub fn r_max<M: GeneralModel + ?Sized>(model: &M) -> Result<Rate> {
    if let Some(r) = model.r_max_override() {
        return Ok(r);
    }
    let (lo, hi) = (model.d0_min(), model.d0_prod());
    let mut rates = Vec::new();
    for k in 1..=40 {
        let d = lo + (hi - lo) * 0.5f64.powi(k);
        if d <= lo {
            break;
        }
        match rate_from_d0(model, d) {
            Ok(r) => rates.push(r.in_nats()),
            Err(_) => break,
        }
    }
    let n = rates.len();
    if n < 3 {
        return Err(MrdError::Convergence {
            context: "too few points to extrapolate R_max".into(),
            iterations: n,
            residual: f64::NAN,
        });
    }
    let (a, b, c) = (rates[n - 3], rates[n - 2], rates[n - 1]);
    let (d1, d2) = (b - a, c - b);
    if d2 <= 1e-12 * c.abs().max(1.0) {
        return Ok(Rate::nats(c));
    }
    let ratio = d2 / d1;
    if ratio < 0.9 && ratio > 0.0 {
        Ok(Rate::nats(c + d2 * ratio / (1.0 - ratio)))
    } else {
        Ok(Rate::nats(f64::INFINITY))
    }
}

/// The i.i.d. mismatched distortion at `rate`, for `0 < rate < R_max`.
///
/// The rate `λ Λ'(λ) − Λ(λ)` decreases in `λ` on `(−∞, 0]`, so the search
/// bisects on `λ` directly instead of nesting a `D0` inversion.
pub fn mismatched_d1<M: GeneralModel + ?Sized>(model: &M, rate: Rate) -> Result<CurvePoint> {
    let r = rate.in_nats();
    let rmax = r_max(model)?.in_nats();
    if !(r > 0.0 && r < rmax) {
        return Err(domain(format!(
            "rate {:.6} bits is outside (0, R_max = {:.6} bits); the tie set is not unique beyond R_max",
            rate.in_bits(),
            rmax / std::f64::consts::LN_2
        )));
    }
    let span = (model.d0_prod() - model.d0_min()).max(1e-300);
    let mut lo = -1.0 / span;
    while rate_at(model, lo)? < r {
        lo *= 4.0;
        if lo < -1e300 {
            return Err(domain(format!("rate {} bits is not reachable", rate.in_bits())));
        }
    }
    let mut hi = 0.0;
    let mut mid = 0.5 * lo;
    for _ in 0..ROOT_ITERS {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate_at(model, mid)? > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d1 = model.tilted_d1(mid)?;
    Ok(CurvePoint {
        rate_bits: rate.in_bits(),
        d0: model.log_mgf_derivative(mid)?,
        d1,
        d1_min: d1,
        d1_max: d1,
        ensemble: EnsembleKind::Iid,
        tie_rule: TieRule::FirstIndex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_log_mgf_value() {
        let g = GaussianModel::quadratic(1.0, 1.0).unwrap();
        let want = -0.5 * 2f64.ln() - 0.25;
        assert!((g.log_mgf(-0.5).unwrap() - want).abs() < 1e-14);
        assert_eq!(g.log_mgf(0.0).unwrap(), 0.0);
        assert!(g.log_mgf(0.1).is_err());
    }

    #[test]
    fn discrete_binary_log_mgf() {
        let u = Pmf::uniform(2);
        let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let m = DiscreteModel::new(u.clone(), u, d0, DistortionMatrix::hamming(2)).unwrap();
        for l in [-3.0, -1.0, -0.2] {
            let want = 0.5 * ((1.0 + f64::exp(l)) / 2.0).ln();
            assert!((m.log_mgf(l).unwrap() - want).abs() < 1e-14);
        }
        assert!((m.r_max_override().unwrap().in_bits() - 0.5).abs() < 1e-14);
    }
}
