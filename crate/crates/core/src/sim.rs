//! Channel generation and Monte Carlo sweeps.
//!
//! Every trial owns an independent ChaCha8 stream selected by `(seed, trial)`,
//! so a trial's channel does not depend on scheduling or on which other trials
//! run. Within a trial all solvers see the same channel, and along the SNR
//! axis the same channel is reused at every grid point.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoordError, Result};
use crate::linalg::CMatrix;
use crate::mmse::ammse_solve;
use crate::model::{CoordinationProblem, CoordinationSolution};
use crate::tree::{exhaustive_optimum, Mode, ENUMERATION_CAP};
use crate::zf::azf_solve;
use crate::{to_db, Complex64};

/// Small-scale fading law of each channel entry before path loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    /// Circularly symmetric complex Gaussian with variance `1/N`.
    #[default]
    Complex,
    /// Real Gaussian with variance `1/N`.
    Real,
}

impl std::str::FromStr for Fading {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "complex" => Ok(Fading::Complex),
            "real" => Ok(Fading::Real),
            other => Err(format!("unknown fading `{other}` (expected complex or real)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub antennas: usize,
    pub devices: usize,
    /// Amplitude gain per device.
    pub pathloss: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub fading: Fading,
}

impl ChannelModel {
    pub fn new(antennas: usize, devices: usize, pathloss: Vec<f64>, seed: u64) -> Result<Self> {
        let model = Self {
            antennas,
            devices,
            pathloss,
            seed,
            fading: Fading::Complex,
        };
        model.validate()?;
        Ok(model)
    }

    /// Unit path loss for every device.
    pub fn uniform(antennas: usize, devices: usize, seed: u64) -> Self {
        Self {
            antennas,
            devices,
            pathloss: vec![1.0; devices],
            seed,
            fading: Fading::Complex,
        }
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.devices == 0 {
            return Err(CoordError::InvalidProblem("antennas and devices must be at least 1".into()));
        }
        if self.pathloss.len() != self.devices {
            return Err(CoordError::DimensionMismatch {
                what: "pathloss",
                expected: self.devices,
                found: self.pathloss.len(),
            });
        }
        if self.pathloss.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(CoordError::InvalidProblem("path loss gains must be positive".into()));
        }
        Ok(())
    }
}

/// Channel of one trial. Entries are drawn column by column (device by
/// device), each scaled by that device's path-loss gain.
pub fn draw_channel(model: &ChannelModel, trial: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(trial);
    let n = model.antennas as f64;
    let mut h = CMatrix::zeros(model.antennas, model.devices);
    for l in 0..model.devices {
        let t = model.pathloss[l];
        for i in 0..model.antennas {
            let f = match model.fading {
                Fading::Complex => {
                    let s = (0.5 / n).sqrt();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * s, im * s)
                }
                Fading::Real => {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * (1.0 / n).sqrt(), 0.0)
                }
            };
            h[(i, l)] = f * t;
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "snr", alias = "snr_db")]
    SnrDb,
    #[serde(rename = "load")]
    Load,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "snr" | "snr_db" => Ok(SweepAxis::SnrDb),
            "load" => Ok(SweepAxis::Load),
            other => Err(format!("unknown axis `{other}` (expected snr or load)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "azf")]
    Azf,
    #[serde(rename = "ammse")]
    Ammse,
    #[serde(rename = "zf-opt", alias = "zf_opt")]
    ZfOpt,
    #[serde(rename = "mmse-opt", alias = "mmse_opt")]
    MmseOpt,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Azf, Solver::Ammse, Solver::ZfOpt, Solver::MmseOpt];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Azf => "azf",
            Solver::Ammse => "ammse",
            Solver::ZfOpt => "zf-opt",
            Solver::MmseOpt => "mmse-opt",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, Solver::ZfOpt | Solver::MmseOpt)
    }

    pub fn solve(self, problem: &CoordinationProblem) -> Result<CoordinationSolution> {
        match self {
            Solver::Azf => azf_solve(problem),
            Solver::Ammse => ammse_solve(problem),
            Solver::ZfOpt => exhaustive_optimum(problem, Mode::Zf),
            Solver::MmseOpt => exhaustive_optimum(problem, Mode::Mmse),
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "azf" => Ok(Solver::Azf),
            "ammse" => Ok(Solver::Ammse),
            "zf-opt" | "zf_opt" => Ok(Solver::ZfOpt),
            "mmse-opt" | "mmse_opt" => Ok(Solver::MmseOpt),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

/// Quantity a sweep is reported for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Error,
    Checktime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub trials: u64,
    pub devices: usize,
    /// Used on the SNR axis; the load axis derives it from the grid.
    pub antennas: usize,
    /// Used on the load axis.
    pub snr_db: f64,
    pub power: f64,
    /// Amplitude gains, one per device.
    pub pathloss: Vec<f64>,
    #[serde(default)]
    pub fading: Fading,
    pub solvers: Vec<Solver>,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            axis: SweepAxis::SnrDb,
            grid: Vec::new(),
            trials: 1000,
            devices: 4,
            antennas: 8,
            snr_db: 10.0,
            power: 1.0,
            pathloss: vec![1.0; 4],
            fading: Fading::Complex,
            solvers: Solver::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(CoordError::InvalidSweep(msg.to_string()));
        if self.grid.is_empty() {
            return invalid("grid is empty");
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return invalid("grid values must be finite");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.solvers.is_empty() {
            return invalid("no solvers requested");
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return invalid("power must be positive");
        }
        if self.axis == SweepAxis::Load && !self.snr_db.is_finite() {
            return invalid("snr must be finite");
        }
        if self.axis == SweepAxis::SnrDb && self.antennas == 0 {
            return invalid("antennas must be at least 1");
        }
        ChannelModel {
            antennas: self.antennas.max(1),
            devices: self.devices,
            pathloss: self.pathloss.clone(),
            seed: self.seed,
            fading: self.fading,
        }
        .validate()
        .map_err(|e| CoordError::InvalidSweep(e.to_string()))?;
        if self.axis == SweepAxis::Load {
            for &xi in &self.grid {
                if self.antennas_at(xi) == 0 {
                    return invalid(&format!("load {xi} gives no antennas"));
                }
            }
        }
        if self.devices > ENUMERATION_CAP && self.solvers.iter().any(|s| s.is_oracle()) {
            return Err(CoordError::InstanceTooLarge {
                devices: self.devices,
                cap: ENUMERATION_CAP,
            });
        }
        Ok(())
    }

    /// Antenna count used at grid value `value`.
    pub fn antennas_at(&self, value: f64) -> usize {
        match self.axis {
            SweepAxis::SnrDb => self.antennas,
            SweepAxis::Load => {
                let n = (value * self.devices as f64).round();
                if n < 1.0 { 0 } else { n as usize }
            }
        }
    }

    pub fn noise_variance_at(&self, value: f64) -> f64 {
        let snr = match self.axis {
            SweepAxis::SnrDb => value,
            SweepAxis::Load => self.snr_db,
        };
        self.power * 10f64.powf(-snr / 10.0)
    }

    fn channel_model(&self, antennas: usize) -> ChannelModel {
        ChannelModel {
            antennas,
            devices: self.devices,
            pathloss: self.pathloss.clone(),
            seed: self.seed,
            fading: self.fading,
        }
    }

    /// Problem instance for one trial at one grid value.
    pub fn problem(&self, value: f64, trial: u64) -> Result<CoordinationProblem> {
        let h = draw_channel(&self.channel_model(self.antennas_at(value)), trial);
        let weights = vec![1.0 / self.devices as f64; self.devices];
        CoordinationProblem::new(h, weights, self.power, self.noise_variance_at(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub error: f64,
    pub check_count: usize,
}

/// Per-trial outcomes of every solver at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrials {
    pub axis_value: f64,
    pub antennas: usize,
    /// Indexed like `SweepSpec::solvers`, then by trial.
    pub records: Vec<Vec<TrialRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub antennas: usize,
    pub solver: Solver,
    pub mean_error_linear: f64,
    pub mean_error_db: f64,
    pub mean_check_count: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: Metric,
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
}

/// Runs every trial and keeps the individual outcomes.
pub fn sweep_trials(spec: &SweepSpec) -> Result<Vec<PointTrials>> {
    spec.validate()?;
    let per_trial: Vec<Vec<Vec<TrialRecord>>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| run_trial(spec, trial))
        .collect::<Result<_>>()?;

    Ok(spec
        .grid
        .iter()
        .enumerate()
        .map(|(p, &value)| PointTrials {
            axis_value: value,
            antennas: spec.antennas_at(value),
            records: (0..spec.solvers.len())
                .map(|s| per_trial.iter().map(|t| t[p][s]).collect())
                .collect(),
        })
        .collect())
}

fn run_trial(spec: &SweepSpec, trial: u64) -> Result<Vec<Vec<TrialRecord>>> {
    let weights = vec![1.0 / spec.devices as f64; spec.devices];
    let shared = match spec.axis {
        SweepAxis::SnrDb => Some(draw_channel(&spec.channel_model(spec.antennas), trial)),
        SweepAxis::Load => None,
    };
    spec.grid
        .iter()
        .map(|&value| {
            let h = match &shared {
                Some(h) => h.clone(),
                None => draw_channel(&spec.channel_model(spec.antennas_at(value)), trial),
            };
            let problem =
                CoordinationProblem::new(h, weights.clone(), spec.power, spec.noise_variance_at(value))?;
            spec.solvers
                .iter()
                .map(|s| {
                    s.solve(&problem).map(|sol| TrialRecord {
                        error: sol.error,
                        check_count: sol.check_count,
                    })
                })
                .collect()
        })
        .collect()
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn aggregate(spec: &SweepSpec, metric: Metric, trials: &[PointTrials]) -> SweepResult {
    let mut points = Vec::new();
    for pt in trials {
        for (s, solver) in spec.solvers.iter().enumerate() {
            let recs = &pt.records[s];
            let n = recs.len() as f64;
            let errors: Vec<f64> = recs.iter().map(|r| r.error).collect();
            let checks: Vec<f64> = recs.iter().map(|r| r.check_count as f64).collect();
            let mean_error = pairwise_sum(&errors) / n;
            points.push(SweepPoint {
                axis_value: pt.axis_value,
                antennas: pt.antennas,
                solver: *solver,
                mean_error_linear: mean_error,
                mean_error_db: to_db(mean_error),
                mean_check_count: pairwise_sum(&checks) / n,
                trials: spec.trials,
                seed: spec.seed,
            });
        }
    }
    SweepResult {
        metric,
        spec: spec.clone(),
        points,
    }
}

/// Mean aggregation error (and check count) per grid point and solver.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let trials = sweep_trials(spec)?;
    Ok(aggregate(spec, Metric::Error, &trials))
}

/// Same harness restricted to the greedy solvers, reported as check time.
pub fn checktime_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.solvers.iter().any(|s| s.is_oracle()) {
        return Err(CoordError::InvalidSweep(
            "check-time sweeps accept only azf and ammse".into(),
        ));
    }
    let trials = sweep_trials(spec)?;
    Ok(aggregate(spec, Metric::Checktime, &trials))
}

pub const CSV_COLUMNS: &str = "axis_value,solver,mean_error_linear,mean_error_db,mean_check_count,trials,seed";

impl SweepResult {
    pub fn point(&self, axis_value: f64, solver: Solver) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.solver == solver && (p.axis_value - axis_value).abs() <= 1e-9)
    }

    /// CSV preceded by `#` metadata lines echoing the configuration.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        writeln!(out, "# metric: {}", serde_json::to_string(&self.metric).unwrap().trim_matches('"')).unwrap();
        writeln!(out, "# config: {}", serde_json::to_string(&self.spec).unwrap()).unwrap();
        if self.spec.axis == SweepAxis::Load {
            let antennas: Vec<String> = self
                .spec
                .grid
                .iter()
                .map(|&v| format!("{v}={}", self.spec.antennas_at(v)))
                .collect();
            writeln!(out, "# antennas: {}", antennas.join(" ")).unwrap();
        }
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        writeln!(out, "{CSV_COLUMNS}").unwrap();
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.axis_value, p.solver, p.mean_error_linear, p.mean_error_db, p.mean_check_count, p.trials, p.seed
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }
}
