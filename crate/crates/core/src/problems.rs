//! The worked example problems with their sources and distortion measures.

use crate::prob::{Axis, DistortionMatrix, JointPmf, Pmf, Psi};
use crate::units::Rate;
use crate::ensembles::EnsembleSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteProblem {
    pub source: Pmf,
    pub d0: DistortionMatrix,
    pub d1: DistortionMatrix,
}

/// Uniform binary source, one-sided `d0(0,1) = 1`, Hamming `d1`.
pub fn binary() -> DiscreteProblem {
    DiscreteProblem {
        source: Pmf::uniform(2),
        d0: DistortionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).expect("static matrix"),
        d1: DistortionMatrix::hamming(2),
    }
}

/// Pair of independent uniform bits, symbol `2·x1 + x2`. `d0` weights the
/// two bit errors by `weight` and `1 - weight`; `d1` averages them.
pub fn parallel(weight: f64) -> DiscreteProblem {
    let bits = |s: usize| (s / 2, s % 2);
    let flip = |a: usize, b: usize| f64::from(u8::from(a != b));
    let d0 = DistortionMatrix::from_fn(4, 4, |x, y| {
        let ((x1, x2), (y1, y2)) = (bits(x), bits(y));
        weight * flip(x1, y1) + (1.0 - weight) * flip(x2, y2)
    })
    .expect("finite entries");
    let d1 = DistortionMatrix::from_fn(4, 4, |x, y| {
        let ((x1, x2), (y1, y2)) = (bits(x), bits(y));
        0.5 * (flip(x1, y1) + flip(x2, y2))
    })
    .expect("finite entries");
    DiscreteProblem {
        source: Pmf::uniform(4),
        d0,
        d1,
    }
}

/// Expurgated parallel spec with uniform bit codebooks and an even split.
pub fn parallel_spec(rate: Rate) -> EnsembleSpec {
    let half = Rate::nats(rate.in_nats() / 2.0);
    EnsembleSpec::ExpurgatedParallel {
        q1: Pmf::uniform(2),
        q2: Pmf::uniform(2),
        psi: Psi::pair(2, 2),
        r1: half,
        r2: half,
    }
}

/// Uniform ternary source, Hamming `d0`, and `d1` that forgives every error
/// on symbol 2.
pub fn ternary() -> DiscreteProblem {
    DiscreteProblem {
        source: Pmf::uniform(3),
        d0: DistortionMatrix::hamming(3),
        d1: DistortionMatrix::from_fn(3, 3, |x, y| f64::from(u8::from(x != y && x != 2))).expect("finite entries"),
    }
}

/// Cloud law for the ternary example: `U = 1{X̂ = 2}` with `X̂` uniform.
pub fn ternary_cloud() -> JointPmf {
    let t = 1.0 / 3.0;
    JointPmf::from_matrix([Axis::U, Axis::Xhat], &[vec![t, t, 0.0], vec![0.0, 0.0, t]]).expect("valid joint")
}

/// Superposition spec for the ternary example with the given split.
pub fn ternary_spec(r0: Rate, r1: Rate) -> EnsembleSpec {
    EnsembleSpec::Superposition {
        q_uxhat: ternary_cloud(),
        r0,
        r1,
    }
}
