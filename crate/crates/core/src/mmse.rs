//! Minimum aggregation-error coordination.
//!
//! The devices at full power (`S`) transmit with `b_ℓ = √P`, and the receiver
//! is the regularized zero-forcing solution on `S`:
//! `m = (1/√P) H_S^* (H_Sᵀ H_S^* + (σ²/P) I)⁻¹ φ_S`.
//! Every other device is zero-forced and must stay strictly below `P` for the
//! subset to describe a feasible setting.

use num_complex::Complex64;

use crate::descent::{greedy_descent, Evaluated, Scheme};
use crate::error::Result;
use crate::linalg::{gram_inverse, GramInverseState};
use crate::model::{
    CoordinationProblem, CoordinationSolution, DeviceSubset, SolverDiagnostics, POWER_TOLERANCE,
};
use crate::zf::{weakest_device, NULL_PROJECTION_THRESHOLD, SHORTCUT_TOLERANCE};

/// Outcome of checking one subset for MMSE feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseFeasibility {
    pub feasible: bool,
    pub receiver: Option<Vec<Complex64>>,
    pub scalings: Option<Vec<Complex64>>,
    pub error: Option<f64>,
    /// Largest `|b_ℓ|²/P` over devices outside the subset.
    pub violation: f64,
}

impl MmseFeasibility {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            receiver: None,
            scalings: None,
            error: None,
            violation: f64::INFINITY,
        }
    }
}

/// Minimizer of `Σ_{ℓ∈S} |√P mᵀh_ℓ − φ_ℓ|² + σ²‖m‖²`.
pub fn mmse_receiver_for_subset(
    problem: &CoordinationProblem,
    subset: DeviceSubset,
) -> Result<Vec<Complex64>> {
    Ok(gram_inverse(problem, subset, problem.noise_to_power())?.receiver(problem))
}

/// `Σ_{ℓ∈S} |√P mᵀh_ℓ − φ_ℓ|² + σ²‖m‖²`.
pub fn subset_objective(problem: &CoordinationProblem, subset: DeviceSubset, receiver: &[Complex64]) -> f64 {
    let sqrt_p = problem.power().sqrt();
    let proj = problem.projections(receiver);
    let mismatch: f64 = subset
        .iter()
        .map(|l| (proj[l] * sqrt_p - problem.weights()[l]).norm_sqr())
        .sum();
    mismatch + problem.noise_variance() * receiver.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

pub(crate) fn evaluate_state(problem: &CoordinationProblem, state: &GramInverseState) -> MmseFeasibility {
    let receiver = state.receiver(problem);
    let subset = state.subset();
    let sqrt_p = problem.power().sqrt();
    let m_norm = receiver.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let proj = problem.projections(&receiver);
    let mut scalings = Vec::with_capacity(problem.devices());
    let mut violation: f64 = 0.0;
    for (l, p) in proj.iter().enumerate() {
        if subset.contains(l) {
            scalings.push(Complex64::new(sqrt_p, 0.0));
            continue;
        }
        if p.norm() == 0.0 || p.norm() <= NULL_PROJECTION_THRESHOLD * m_norm * problem.channel_norm(l) {
            return MmseFeasibility {
                receiver: Some(receiver),
                ..MmseFeasibility::infeasible()
            };
        }
        let b = Complex64::new(problem.weights()[l], 0.0) / p;
        violation = violation.max(b.norm_sqr() / problem.power());
        scalings.push(b);
    }
    let error = subset_objective(problem, subset, &receiver);
    MmseFeasibility {
        feasible: violation < 1.0 - POWER_TOLERANCE,
        receiver: Some(receiver),
        scalings: Some(scalings),
        error: Some(error),
        violation,
    }
}

/// Checks whether `subset` describes a feasible MMSE setting: devices in the
/// subset transmit at `√P`, all others are zero-forced strictly below `P`.
pub fn check_mmse_feasible(problem: &CoordinationProblem, subset: DeviceSubset) -> MmseFeasibility {
    if subset.is_empty() || subset.validate(problem.devices()).is_err() {
        return MmseFeasibility::infeasible();
    }
    match gram_inverse(problem, subset, problem.noise_to_power()) {
        Ok(state) => evaluate_state(problem, &state),
        Err(_) => MmseFeasibility::infeasible(),
    }
}

/// Closed-form MMSE optimum when the weakest device dominates.
///
/// Same structure as the zero-forcing shortcut with
/// `g_ℓ = (h_sᴴh_ℓ + (σ²/P)·[ℓ = s]) / φ_ℓ`; the receiver is
/// `√P φ_s h_s^* / (P‖h_s‖² + σ²)`.
pub fn closed_form_shortcut(problem: &CoordinationProblem) -> Option<CoordinationSolution> {
    let devices = problem.devices();
    let s = weakest_device(problem);
    let hs = problem.channel().column(s);
    let hs_sq = problem.channel_norm(s).powi(2);
    let reg = problem.noise_to_power();
    if hs_sq == 0.0 {
        return None;
    }
    let g: Vec<Complex64> = (0..devices)
        .map(|l| {
            let mut inner: Complex64 = hs
                .iter()
                .zip(problem.channel().column(l))
                .map(|(a, b)| a.conj() * b)
                .sum();
            if l == s {
                inner += reg;
            }
            inner / problem.weights()[l]
        })
        .collect();
    let gs = g[s].norm();
    if g.iter().any(|gl| gl.norm() < gs * (1.0 - SHORTCUT_TOLERANCE)) {
        return None;
    }
    let subset = DeviceSubset::from_indices(
        &(0..devices)
            .filter(|&l| (g[l].norm() - gs).abs() <= SHORTCUT_TOLERANCE * gs)
            .collect::<Vec<_>>(),
    );
    let power = problem.power();
    let sqrt_p = power.sqrt();
    let phi_s = problem.weights()[s];
    let scale = sqrt_p * phi_s / (power * hs_sq + problem.noise_variance());
    let receiver: Vec<Complex64> = hs.iter().map(|h| h.conj() * scale).collect();
    let proj = problem.projections(&receiver);
    let scalings: Vec<Complex64> = (0..devices)
        .map(|l| {
            if subset.contains(l) {
                Complex64::new(sqrt_p, 0.0)
            } else {
                Complex64::new(problem.weights()[l], 0.0) / proj[l]
            }
        })
        .collect();
    let error = subset_objective(problem, subset, &receiver);
    Some(CoordinationSolution {
        receiver,
        scalings,
        subset,
        error,
        check_count: 0,
        diagnostics: SolverDiagnostics {
            path: vec![subset],
            downdate_fallbacks: 0,
        },
    })
}

struct MmseScheme;

impl Scheme for MmseScheme {
    fn regularizer(&self, problem: &CoordinationProblem) -> f64 {
        problem.noise_to_power()
    }

    fn evaluate(&self, problem: &CoordinationProblem, state: &GramInverseState) -> Option<Evaluated> {
        let f = evaluate_state(problem, state);
        if !f.feasible {
            return None;
        }
        let error = f.error?;
        Some(Evaluated {
            receiver: f.receiver?,
            scalings: f.scalings?,
            error,
            key: error,
        })
    }
}

/// Approximate MMSE: greedy descent of the MMSE feasibility tree, moving at
/// each step to the feasible child with the smallest aggregation error.
/// Needs `N ≥ L`; with `σ² = 0` the full Gram must be nonsingular.
pub fn ammse_solve(problem: &CoordinationProblem) -> Result<CoordinationSolution> {
    greedy_descent(problem, &MmseScheme)
}
