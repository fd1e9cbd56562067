//! Feasibility trees and exhaustive oracles.
//!
//! Nodes are the subsets that describe feasible settings; a node's parent is
//! the feasible strict superset of largest cardinality. Errors shrink toward
//! the leaves, so the optimum sits at a leaf.

use std::fmt::Write as _;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoordError, Result};
use crate::mmse::check_mmse_feasible;
use crate::model::{CoordinationProblem, CoordinationSolution, DeviceSubset, SolverDiagnostics};
use crate::zf::check_zf_feasible;

/// Device cap for exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 20;

/// Device cap for materializing a tree.
pub const TREE_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Zf,
    Mmse,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Zf => "zf",
            Mode::Mmse => "mmse",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zf" => Ok(Mode::Zf),
            "mmse" => Ok(Mode::Mmse),
            other => Err(format!("unknown mode `{other}` (expected zf or mmse)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleEntry {
    pub subset: DeviceSubset,
    pub error: f64,
}

/// Every non-empty subset of `0..devices` with at most `max_size` members,
/// ordered by size and then lexicographically by member list.
pub fn canonical_subsets(devices: usize, max_size: usize) -> Vec<DeviceSubset> {
    (1..=max_size.min(devices))
        .flat_map(|k| (0..devices).combinations(k).map(|c| DeviceSubset::from_indices(&c)))
        .collect()
}

fn evaluate(problem: &CoordinationProblem, mode: Mode, subset: DeviceSubset) -> Option<CoordinationSolution> {
    let (feasible, receiver, scalings, error) = match mode {
        Mode::Zf => {
            let f = check_zf_feasible(problem, subset);
            (f.feasible, f.receiver, f.scalings, f.error)
        }
        Mode::Mmse => {
            let f = check_mmse_feasible(problem, subset);
            (f.feasible, f.receiver, f.scalings, f.error)
        }
    };
    if !feasible {
        return None;
    }
    Some(CoordinationSolution {
        receiver: receiver?,
        scalings: scalings?,
        subset,
        error: error?,
        check_count: 0,
        diagnostics: SolverDiagnostics {
            path: vec![subset],
            downdate_fallbacks: 0,
        },
    })
}

fn check_cap(problem: &CoordinationProblem, cap: usize) -> Result<()> {
    if problem.devices() > cap {
        return Err(CoordError::InstanceTooLarge {
            devices: problem.devices(),
            cap,
        });
    }
    Ok(())
}

/// All feasible subsets (of size at most `N`) with their errors, in
/// canonical order.
pub fn enumerate_feasible(problem: &CoordinationProblem, mode: Mode) -> Result<Vec<FeasibleEntry>> {
    check_cap(problem, ENUMERATION_CAP)?;
    let subsets = canonical_subsets(problem.devices(), problem.antennas());
    Ok(subsets
        .par_iter()
        .map(|&s| {
            evaluate(problem, mode, s).map(|sol| FeasibleEntry {
                subset: s,
                error: sol.error,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Minimum-error feasible setting by complete search. `check_count` is the
/// number of subsets evaluated.
pub fn exhaustive_optimum(problem: &CoordinationProblem, mode: Mode) -> Result<CoordinationSolution> {
    check_cap(problem, ENUMERATION_CAP)?;
    let subsets = canonical_subsets(problem.devices(), problem.antennas());
    let best = subsets
        .par_iter()
        .map(|&s| evaluate(problem, mode, s).map(|sol| sol.error))
        .collect::<Vec<_>>()
        .into_iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (i, e)))
        // first in canonical order wins ties
        .fold(None, |best: Option<(usize, f64)>, (i, e)| match best {
            Some((_, be)) if be <= e => best,
            _ => Some((i, e)),
        });
    let (index, _) = best.ok_or(CoordError::NoFeasibleSetting)?;
    let mut sol = evaluate(problem, mode, subsets[index]).ok_or(CoordError::NoFeasibleSetting)?;
    sol.check_count = subsets.len();
    Ok(sol)
}

/// Feasible subsets arranged by inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityTree {
    pub mode: Mode,
    /// Canonical order (smallest subsets first).
    pub nodes: Vec<FeasibleEntry>,
    /// `(parent, child)` indices into `nodes`.
    pub edges: Vec<(usize, usize)>,
    /// The full device set when it is feasible.
    pub root: Option<DeviceSubset>,
    /// Nodes without a feasible strict subset.
    pub leaves: Vec<DeviceSubset>,
}

#[derive(Serialize)]
struct TreeExport<'a> {
    mode: Mode,
    nodes: &'a [FeasibleEntry],
    edges: Vec<[usize; 2]>,
}

impl FeasibilityTree {
    pub fn parent_of(&self, child: usize) -> Option<usize> {
        self.edges.iter().find(|(_, c)| *c == child).map(|(p, _)| *p)
    }

    pub fn to_json(&self) -> String {
        let export = TreeExport {
            mode: self.mode,
            nodes: &self.nodes,
            edges: self.edges.iter().map(|&(p, c)| [p, c]).collect(),
        };
        serde_json::to_string_pretty(&export).expect("tree serializes")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        writeln!(out, "digraph feasibility_tree {{").unwrap();
        writeln!(out, "  label=\"{} feasibility tree\";", self.mode.name()).unwrap();
        writeln!(out, "  node [shape=box];").unwrap();
        for (i, n) in self.nodes.iter().enumerate() {
            let leaf = self.leaves.contains(&n.subset);
            writeln!(
                out,
                "  n{i} [label=\"{}\\nerror {:.6e}\"{}];",
                n.subset,
                n.error,
                if leaf { ", style=bold" } else { "" }
            )
            .unwrap();
        }
        for (p, c) in &self.edges {
            writeln!(out, "  n{p} -> n{c};").unwrap();
        }
        writeln!(out, "}}").unwrap();
        out
    }
}

/// Builds the feasibility tree. Parent ties among equally large supersets
/// go to the lexicographically smallest member list.
pub fn build_tree(problem: &CoordinationProblem, mode: Mode) -> Result<FeasibilityTree> {
    check_cap(problem, TREE_CAP)?;
    let nodes = enumerate_feasible(problem, mode)?;
    let mut edges = Vec::new();
    for (ci, child) in nodes.iter().enumerate() {
        // canonical order puts larger sets later and lexicographic order
        // within a size, so the first maximal-size superset is the parent
        let mut parent: Option<usize> = None;
        for (pi, cand) in nodes.iter().enumerate().skip(ci + 1) {
            if !child.subset.is_strict_subset_of(cand.subset) {
                continue;
            }
            match parent {
                Some(p) if nodes[p].subset.len() >= cand.subset.len() => {}
                _ => parent = Some(pi),
            }
        }
        if let Some(p) = parent {
            edges.push((p, ci));
        }
    }
    edges.sort_unstable();
    let full = DeviceSubset::full(problem.devices());
    let root = nodes.iter().any(|n| n.subset == full).then_some(full);
    let leaves = nodes
        .iter()
        .filter(|n| !nodes.iter().any(|m| m.subset.is_strict_subset_of(n.subset)))
        .map(|n| n.subset)
        .collect();
    Ok(FeasibilityTree {
        mode,
        nodes,
        edges,
        root,
        leaves,
    })
}

/// One line per entry: subset bitmask and error at 15 significant digits.
pub fn golden_lines(entries: &[FeasibleEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{} {:.14e}\n", e.subset.bits(), e.error))
        .collect()
}
