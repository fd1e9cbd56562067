//! Zero-forcing coordination.
//!
//! A feasible ZF setting zero-forces every device (`mᵀh_ℓ b_ℓ = φ_ℓ`) while
//! respecting the power cap. It is determined by the subset `S` of devices at
//! full power: the receiver is the minimum-norm solution of
//! `H_Sᵀ m = φ_S / √P`, and every other device's scaling follows from the
//! zero-forcing equation. The error of such a setting is `σ²‖m‖²`.

use num_complex::Complex64;

use crate::descent::{greedy_descent, Evaluated, Scheme};
use crate::error::{CoordError, Result};
use crate::linalg::{gram_inverse, GramInverseState};
use crate::model::{
    CoordinationProblem, CoordinationSolution, DeviceSubset, SolverDiagnostics, POWER_TOLERANCE,
};

/// Relative tolerance of the weakest-device shortcut's comparisons.
pub const SHORTCUT_TOLERANCE: f64 = 1e-9;

/// Projections `|mᵀh_ℓ|` below this multiple of `‖m‖‖h_ℓ‖` are treated as zero.
pub const NULL_PROJECTION_THRESHOLD: f64 = 1e-14;

/// Outcome of checking one subset for zero-forcing feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfFeasibility {
    pub feasible: bool,
    pub receiver: Option<Vec<Complex64>>,
    pub scalings: Option<Vec<Complex64>>,
    /// `σ²‖m‖²`, present whenever the receiver is.
    pub error: Option<f64>,
    /// Largest `|b_ℓ|²/P` over devices outside the subset; infinite when a
    /// projection vanishes, zero when the subset holds every device.
    pub violation: f64,
    /// An outside device sits within the power tolerance of `P`.
    pub boundary: bool,
}

impl ZfFeasibility {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            receiver: None,
            scalings: None,
            error: None,
            violation: f64::INFINITY,
            boundary: false,
        }
    }
}

/// `m = (1/√P) H_S^* (H_Sᵀ H_S^*)⁻¹ φ_S`, so that `mᵀh_ℓ = φ_ℓ/√P` on `S`.
pub fn zf_receiver_for_subset(
    problem: &CoordinationProblem,
    subset: DeviceSubset,
) -> Result<Vec<Complex64>> {
    Ok(gram_inverse(problem, subset, 0.0)?.receiver(problem))
}

/// `b_ℓ = φ_ℓ / (mᵀh_ℓ)` for every device.
pub fn zf_scalings(problem: &CoordinationProblem, receiver: &[Complex64]) -> Result<Vec<Complex64>> {
    if receiver.len() != problem.antennas() {
        return Err(CoordError::DimensionMismatch {
            what: "receiver",
            expected: problem.antennas(),
            found: receiver.len(),
        });
    }
    let m_norm = norm(receiver);
    problem
        .projections(receiver)
        .into_iter()
        .enumerate()
        .map(|(l, p)| {
            if p.norm() <= NULL_PROJECTION_THRESHOLD * m_norm * problem.channel_norm(l) || p.norm() == 0.0 {
                Err(CoordError::NullProjection { device: l })
            } else {
                Ok(Complex64::new(problem.weights()[l], 0.0) / p)
            }
        })
        .collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Zero-forcing feasibility of the subset held by a Gram-inverse state.
pub(crate) fn evaluate_state(problem: &CoordinationProblem, state: &GramInverseState) -> ZfFeasibility {
    let receiver = state.receiver(problem);
    let error = problem.noise_variance() * receiver.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let scalings = match zf_scalings(problem, &receiver) {
        Ok(b) => b,
        Err(_) => {
            return ZfFeasibility {
                receiver: Some(receiver),
                error: Some(error),
                ..ZfFeasibility::infeasible()
            }
        }
    };
    let subset = state.subset();
    // devices in the subset sit at P by construction and are not re-checked
    let violation = scalings
        .iter()
        .enumerate()
        .filter(|(l, _)| !subset.contains(*l))
        .map(|(_, b)| b.norm_sqr() / problem.power())
        .fold(0.0, f64::max);
    ZfFeasibility {
        feasible: violation <= 1.0 + POWER_TOLERANCE,
        receiver: Some(receiver),
        scalings: Some(scalings),
        error: Some(error),
        violation,
        boundary: (violation - 1.0).abs() <= POWER_TOLERANCE,
    }
}

/// Checks whether `subset` (the devices at full power) describes a feasible
/// zero-forcing setting. Singular Gram matrices and vanishing projections
/// make the subset infeasible.
pub fn check_zf_feasible(problem: &CoordinationProblem, subset: DeviceSubset) -> ZfFeasibility {
    if subset.is_empty() || subset.validate(problem.devices()).is_err() {
        return ZfFeasibility::infeasible();
    }
    match gram_inverse(problem, subset, 0.0) {
        Ok(state) => evaluate_state(problem, &state),
        Err(_) => ZfFeasibility::infeasible(),
    }
}

/// `(σ²/P) φ_Sᵀ (H_Sᵀ H_S^*)⁻¹ φ_S`.
pub fn zf_closed_form_error(problem: &CoordinationProblem, subset: DeviceSubset) -> Result<f64> {
    let state = gram_inverse(problem, subset, 0.0)?;
    let w = state.solve_weights(problem);
    let quad: f64 = state
        .members()
        .iter()
        .zip(&w)
        .map(|(&l, wl)| problem.weights()[l] * wl.re)
        .sum();
    Ok(problem.noise_to_power() * quad)
}

/// Closed-form zero-forcing optimum when the weakest device dominates.
///
/// With `s` the device of smallest channel norm and
/// `g_ℓ = h_sᴴh_ℓ / φ_ℓ`, the optimum is a matched filter on `h_s` whenever
/// `|g_s| ≤ |g_ℓ|` for every `ℓ`; the devices attaining equality transmit at
/// full power. Returns `None` when the condition fails.
pub fn closed_form_shortcut(problem: &CoordinationProblem) -> Option<CoordinationSolution> {
    let devices = problem.devices();
    let s = weakest_device(problem);
    let hs = problem.channel().column(s);
    let hs_sq = problem.channel_norm(s).powi(2);
    if hs_sq == 0.0 {
        return None;
    }
    let g: Vec<Complex64> = (0..devices)
        .map(|l| {
            let inner: Complex64 = hs
                .iter()
                .zip(problem.channel().column(l))
                .map(|(a, b)| a.conj() * b)
                .sum();
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
    let sqrt_p = problem.power().sqrt();
    let phi_s = problem.weights()[s];
    let receiver: Vec<Complex64> = hs.iter().map(|h| h.conj() * (phi_s / (sqrt_p * hs_sq))).collect();
    let scalings: Vec<Complex64> = g.iter().map(|gl| g[s] / gl * sqrt_p).collect();
    let error = problem.noise_variance() * phi_s * phi_s / (problem.power() * hs_sq);
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

/// Index of the device with the smallest channel norm (first on ties).
pub(crate) fn weakest_device(problem: &CoordinationProblem) -> usize {
    (0..problem.devices())
        .map(|l| (l, problem.channel_norm(l)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}

struct ZfScheme;

impl Scheme for ZfScheme {
    fn regularizer(&self, _problem: &CoordinationProblem) -> f64 {
        0.0
    }

    fn evaluate(&self, problem: &CoordinationProblem, state: &GramInverseState) -> Option<Evaluated> {
        let f = evaluate_state(problem, state);
        if !f.feasible {
            return None;
        }
        let receiver = f.receiver?;
        let key = receiver.iter().map(|z| z.norm_sqr()).sum::<f64>();
        Some(Evaluated {
            receiver,
            scalings: f.scalings?,
            error: f.error?,
            key,
        })
    }
}

/// Approximate zero forcing: greedy descent of the ZF feasibility tree,
/// moving at each step to the feasible child whose receiver has the
/// smallest norm. Needs `N ≥ L`.
pub fn azf_solve(problem: &CoordinationProblem) -> Result<CoordinationSolution> {
    greedy_descent(problem, &ZfScheme)
}
