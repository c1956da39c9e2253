use anyhow::Result;
use mrd_core::closed_form::{binary_curve, parallel_curve, r_gaussian, ternary_matched, BinaryEnsemble, ParallelEnsemble};
use mrd_core::dual::{rate_from_d0, GaussianModel};
use mrd_core::ensembles::{d1bar_cc, d1bar_expurgated, d1bar_iid, d1bar_superposition, evaluate};
use mrd_core::oracle::{grid_oracle_cc, random_instance};
use mrd_core::problems;
use mrd_core::{Axis, DistortionMatrix, JointPmf, Pmf, Psi, Rate, TieRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oracles,
    Reductions,
    Examples,
    All,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tol: f64,
    /// Extra condition besides `|value - reference| ≤ tol`.
    pub holds: bool,
}

impl Check {
    fn close(name: impl Into<String>, value: f64, reference: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            reference,
            tol,
            holds: true,
        }
    }

    /// `value > reference`.
    fn exceeds(name: impl Into<String>, value: f64, reference: f64) -> Check {
        Check {
            name: name.into(),
            value,
            reference,
            tol: f64::INFINITY,
            holds: value > reference,
        }
    }

    pub fn passed(&self) -> bool {
        self.holds && (self.value - self.reference).abs() <= self.tol
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        if self.tol.is_finite() {
            format!(
                "{verdict} {}: value {:.10} reference {:.10} |diff| {:.3e} tol {:.1e}",
                self.name,
                self.value,
                self.reference,
                (self.value - self.reference).abs(),
                self.tol
            )
        } else {
            format!("{verdict} {}: value {:.10} must exceed {:.10}", self.name, self.value, self.reference)
        }
    }
}

fn oracles() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for seed in [11u64, 12, 13] {
        let inst = random_instance(seed, 2, 2)?;
        let p = d1bar_cc(&inst.px, &inst.q, &inst.d0, &inst.d1, inst.rate)?;
        let o = grid_oracle_cc(&inst.px, &inst.q, &inst.d0, &inst.d1, inst.rate, 1e-3, 1e-9)?;
        out.push(Check::close(format!("oracle 2x2 seed {seed} d0"), p.d0, o.d0_star, 2e-3));
        out.push(Check::close(format!("oracle 2x2 seed {seed} d1"), p.d1, o.d1_max, 2e-3));
    }
    Ok(out)
}

fn reductions() -> Result<Vec<Check>> {
    let px = Pmf::new(vec![0.2, 0.3, 0.5])?;
    let q = Pmf::new(vec![0.4, 0.4, 0.2])?;
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]])?;
    let d1 = DistortionMatrix::hamming(3);
    let r = Rate::bits(0.3);
    let cc = d1bar_cc(&px, &q, &d0, &d1, r)?;
    let cloud = JointPmf::from_flat(vec![Axis::U, Axis::Xhat], vec![1, 3], q.probs().to_vec())?;
    let sc = d1bar_superposition(&px, &cloud, &d0, &d1, Rate::bits(0.1), Rate::bits(0.2))?;

    let px2 = Pmf::new(vec![0.3, 0.3, 0.4])?;
    let q1 = Pmf::new(vec![0.3, 0.7])?;
    let q2 = Pmf::new(vec![0.5, 0.5])?;
    let e0 = DistortionMatrix::new(vec![vec![0.0, 0.6], vec![0.8, 0.0], vec![1.0, 0.5]])?;
    let e1 = DistortionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.3, 0.6]])?;
    // ψ picks the first component, so each output symbol is a column of e0.
    let lift = |m: &DistortionMatrix| DistortionMatrix::from_fn(3, 2, |x, y| m.get(x, y));
    let ex = d1bar_expurgated(&px2, &q1, &q2, &Psi::first(2, 2), &lift(&e0)?, &lift(&e1)?, r, Rate::ZERO)?;
    let cc1 = d1bar_cc(&px2, &q1, &e0, &e1, r)?;

    let b = problems::binary();
    let bin = d1bar_cc(&b.source, &Pmf::uniform(2), &b.d0, &b.d1, Rate::bits(0.5))?;
    let matched = binary_curve(0.5, BinaryEnsemble::Matched, TieRule::Pessimistic)?;
    Ok(vec![
        Check::close("superposition |U|=1 equals cc", sc.d1, cc.d1, 1e-6),
        Check::close("expurgated psi=first, R2=0 equals cc", ex.d1, cc1.d1, 1e-6),
        Check::close("binary cc equals matched", bin.d1, matched, 1e-6),
    ])
}

fn examples() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let b = problems::binary();
    let u2 = Pmf::uniform(2);
    for r in [0.1, 0.25, 0.4, 0.6, 0.75, 0.9] {
        let g = d1bar_iid(&b.source, &u2, &b.d0, &b.d1, Rate::bits(r))?;
        let c = binary_curve(r, BinaryEnsemble::Iid, TieRule::Pessimistic)?;
        out.push(Check::close(format!("binary iid R={r}"), g.d1, c, 1e-3));
    }
    let t = problems::ternary();
    for r in [0.2, 0.6, 1.0, 1.4] {
        let m = ternary_matched(r)?;
        let spec = problems::ternary_spec(Rate::bits(m.r0_bits), Rate::bits(r - m.r0_bits));
        let s = evaluate(&spec, &t.source, &t.d0, &t.d1, Rate::bits(r))?;
        out.push(Check::close(format!("ternary superposition equals matched R={r}"), s.d1, m.d1, 1e-4));
    }
    let p = problems::parallel(0.3);
    for r in [0.5, 1.0, 1.5] {
        let ex = evaluate(&problems::parallel_spec(Rate::bits(r)), &p.source, &p.d0, &p.d1, Rate::bits(r))?;
        let m = parallel_curve(r, 0.3, ParallelEnsemble::Matched)?;
        out.push(Check::close(format!("parallel expurgated equals matched R={r}"), ex.d1, m, 1e-4));
    }
    let ind = parallel_curve(1.0, 0.3, ParallelEnsemble::Independent)?;
    let m = parallel_curve(1.0, 0.3, ParallelEnsemble::Matched)?;
    out.push(Check::exceeds("parallel independent worse than expurgated R=1", ind, m));
    let g = GaussianModel::sign(1.0, 1.0)?;
    for d0 in [0.1, 0.5, 1.0, 1.5] {
        let dual = rate_from_d0(&g, d0)?.in_nats();
        out.push(Check::close(format!("gaussian primal-dual D0={d0}"), dual, r_gaussian(d0, 1.0, 1.0)?, 1e-6));
    }
    Ok(out)
}

pub fn run(suite: Suite) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Oracles => oracles()?,
        Suite::Reductions => reductions()?,
        Suite::Examples => examples()?,
        Suite::All => {
            let mut v = reductions()?;
            v.extend(examples()?);
            v.extend(oracles()?);
            v
        }
    })
}

