//! Achievable distortion-rate bounds for mismatched minimum-distortion
//! encoding.
//!
//! The encoder picks the codeword minimising a surrogate metric `d0` while
//! performance is judged by `d1`. This crate computes the resulting
//! achievable `d1` for constant-composition, i.i.d., superposition and
//! expurgated parallel random codebooks, evaluates the log-MGF dual for
//! general alphabets, and simulates actual random codebooks.

pub mod closed_form;
pub mod dual;
pub mod ensembles;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod problems;
mod linalg;
pub mod prob;
pub mod solvers;
pub mod units;

pub use ensembles::{CurvePoint, EnsembleKind, EnsembleSpec, TieRule};
pub use error::{MrdError, Result};
pub use prob::{
    binary_entropy, expected_distortion, kl_to_product, mutual_info, ternary_entropy, Axis,
    DistortionMatrix, JointPmf, Pmf, Psi,
};
pub use units::{Divergence, Rate, Units};
