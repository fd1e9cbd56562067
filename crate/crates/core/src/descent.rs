//! Single-path greedy descent of the feasibility tree, shared by AZF and
//! AMMSE. Starting from all devices, each step evaluates every child obtained
//! by dropping one device and moves to the feasible child with the smallest
//! key; the search ends when no child is feasible or one device is left.

use num_complex::Complex64;

use crate::error::{CoordError, Result};
use crate::linalg::{downdate_or_recompute, gram_inverse, GramInverseState};
use crate::model::{CoordinationProblem, CoordinationSolution, DeviceSubset, SolverDiagnostics};

/// Children whose keys agree to this relative tolerance count as tied; ties
/// go to the child that removed the smallest device index.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) struct Evaluated {
    pub receiver: Vec<Complex64>,
    pub scalings: Vec<Complex64>,
    pub error: f64,
    /// Child-selection criterion, smaller is better.
    pub key: f64,
}

pub(crate) trait Scheme {
    fn regularizer(&self, problem: &CoordinationProblem) -> f64;

    /// `None` when the subset of `state` does not describe a feasible setting.
    fn evaluate(&self, problem: &CoordinationProblem, state: &GramInverseState) -> Option<Evaluated>;
}

pub(crate) fn greedy_descent(
    problem: &CoordinationProblem,
    scheme: &impl Scheme,
) -> Result<CoordinationSolution> {
    if problem.antennas() < problem.devices() {
        return Err(CoordError::TooFewAntennas {
            antennas: problem.antennas(),
            devices: problem.devices(),
        });
    }
    let full = DeviceSubset::full(problem.devices());
    let mut current = gram_inverse(problem, full, scheme.regularizer(problem)).map_err(|e| match e {
        CoordError::SingularGram { .. } => CoordError::RootInfeasible,
        other => other,
    })?;
    let mut current_eval = scheme
        .evaluate(problem, &current)
        .ok_or(CoordError::RootInfeasible)?;
    let mut check_count = 1;
    let mut fallbacks = 0;
    let mut path = vec![full];

    while current.subset().len() > 1 {
        let mut best: Option<(GramInverseState, Evaluated)> = None;
        for device in current.members().to_vec() {
            check_count += 1;
            let Ok(child) = downdate_or_recompute(&current, problem, device, &mut fallbacks) else {
                continue;
            };
            let Some(eval) = scheme.evaluate(problem, &child) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((_, b)) => eval.key < b.key - TIE_TOLERANCE * b.key.abs(),
            };
            if better {
                best = Some((child, eval));
            }
        }
        match best {
            Some((child, eval)) => {
                path.push(child.subset());
                current = child;
                current_eval = eval;
            }
            None => break,
        }
    }

    Ok(CoordinationSolution {
        receiver: current_eval.receiver,
        scalings: current_eval.scalings,
        subset: current.subset(),
        error: current_eval.error,
        check_count,
        diagnostics: SolverDiagnostics {
            path,
            downdate_fallbacks: fallbacks,
        },
    })
}
