//! Device coordination for over-the-air federated learning.
//!
//! A multi-antenna parameter server receives the superposition of scaled
//! local models and applies a linear receiver `m`; devices scale their
//! transmissions by `b_ℓ` under a per-device power cap `P`. This crate
//! chooses `(m, b)` under two criteria:
//!
//! * zero forcing ([`zf`]): cancel the model mismatch exactly and minimize
//!   the noise amplification `σ²‖m‖²`;
//! * minimum aggregation error ([`mmse`]): minimize the full error.
//!
//! Both reduce to choosing the set of devices that transmit at full power.
//! Solvers come in three flavours: closed-form shortcuts that apply when the
//! weakest device dominates, greedy descents of the feasibility tree (AZF and
//! AMMSE), and exhaustive oracles ([`tree`]). The [`sim`] module drives Monte
//! Carlo sweeps over Rayleigh channels.

pub mod error;
pub mod linalg;
pub mod mmse;
pub mod model;
pub mod sim;
pub mod tree;
pub mod zf;

mod descent;

pub use error::{CoordError, Result};
pub use linalg::{CMatrix, GramInverseState};
pub use model::{
    aggregation_error, example_network, CoordinationProblem, CoordinationSolution, DeviceSubset,
    ProblemDocument, SolverDiagnostics, POWER_TOLERANCE,
};
pub use num_complex::Complex64;
pub use tree::Mode;

/// Converts a linear error to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
