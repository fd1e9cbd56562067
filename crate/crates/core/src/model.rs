//! Problem and solution types and the aggregation-error metric.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoordError, Result};
use crate::linalg::CMatrix;

/// Relative slack on the power cap: `|b_ℓ|² ≤ P(1 + POWER_TOLERANCE)`.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Largest device count a [`DeviceSubset`] can represent.
pub const MAX_DEVICES: usize = 64;

/// Set of device indices, stored as a bitmask. Indices are 0-based in the
/// API; display and serialization are 1-based.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct DeviceSubset(u64);

impl DeviceSubset {
    pub const EMPTY: DeviceSubset = DeviceSubset(0);

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// All devices `0..devices`.
    pub fn full(devices: usize) -> Self {
        assert!(devices <= MAX_DEVICES);
        if devices == MAX_DEVICES {
            Self(u64::MAX)
        } else {
            Self((1u64 << devices) - 1)
        }
    }

    pub fn singleton(device: usize) -> Self {
        assert!(device < MAX_DEVICES);
        Self(1 << device)
    }

    pub fn from_indices(devices: &[usize]) -> Self {
        devices.iter().fold(Self::EMPTY, |s, &d| s.with(d))
    }

    /// Parses 1-based indices, rejecting zero and anything past `devices`.
    pub fn from_one_based(indices: &[usize], devices: usize) -> Result<Self> {
        let mut s = Self::EMPTY;
        for &i in indices {
            if i == 0 || i > devices {
                return Err(CoordError::InvalidSubset(format!(
                    "device index {i} outside 1..={devices}"
                )));
            }
            s = s.with(i - 1);
        }
        Ok(s)
    }

    pub fn contains(self, device: usize) -> bool {
        device < MAX_DEVICES && self.0 & (1 << device) != 0
    }

    pub fn with(self, device: usize) -> Self {
        assert!(device < MAX_DEVICES);
        Self(self.0 | (1 << device))
    }

    pub fn without(self, device: usize) -> Self {
        if device >= MAX_DEVICES {
            return self;
        }
        Self(self.0 & !(1 << device))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: DeviceSubset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_subset_of(self, other: DeviceSubset) -> bool {
        self.is_subset_of(other) && self != other
    }

    /// Members in ascending order (0-based).
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// Checks that every member is a valid device of an `devices`-device network.
    pub fn validate(self, devices: usize) -> Result<()> {
        if devices < MAX_DEVICES && self.0 >> devices != 0 {
            return Err(CoordError::InvalidSubset(format!(
                "{self} has members outside 1..={devices}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DeviceSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for DeviceSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceSubset{self}")
    }
}

impl Serialize for DeviceSubset {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DeviceSubset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(deserializer)?;
        DeviceSubset::from_one_based(&v, MAX_DEVICES).map_err(serde::de::Error::custom)
    }
}

/// Channel, aggregation weights, power cap and noise level of one
/// coordination instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationProblem {
    channel: CMatrix,
    weights: Vec<f64>,
    power: f64,
    noise_variance: f64,
}

impl CoordinationProblem {
    /// `channel` is `N × L`, column `ℓ` holding the channel of device `ℓ`.
    pub fn new(channel: CMatrix, weights: Vec<f64>, power: f64, noise_variance: f64) -> Result<Self> {
        let (n, l) = (channel.rows(), channel.cols());
        if n == 0 || l == 0 {
            return Err(CoordError::InvalidProblem(format!(
                "channel must be at least 1x1, got {n}x{l}"
            )));
        }
        if l > MAX_DEVICES {
            return Err(CoordError::InstanceTooLarge {
                devices: l,
                cap: MAX_DEVICES,
            });
        }
        if weights.len() != l {
            return Err(CoordError::DimensionMismatch {
                what: "weights",
                expected: l,
                found: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(CoordError::InvalidProblem(format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(CoordError::InvalidProblem(format!(
                "power budget must be positive, got {power}"
            )));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(CoordError::InvalidProblem(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        if !channel.is_finite() {
            return Err(CoordError::InvalidProblem("channel has non-finite entries".into()));
        }
        Ok(Self {
            channel,
            weights,
            power,
            noise_variance,
        })
    }

    pub fn channel(&self) -> &CMatrix {
        &self.channel
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Number of receive antennas `N`.
    pub fn antennas(&self) -> usize {
        self.channel.rows()
    }

    /// Number of devices `L`.
    pub fn devices(&self) -> usize {
        self.channel.cols()
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.channel.clone(), self.weights.clone(), self.power, noise_variance)
    }

    /// `σ²/P`, the regularizer of the MMSE receiver.
    pub fn noise_to_power(&self) -> f64 {
        self.noise_variance / self.power
    }

    pub fn channel_norm(&self, device: usize) -> f64 {
        self.channel.column(device).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `m^T h_ℓ` for every device.
    pub fn projections(&self, receiver: &[Complex64]) -> Vec<Complex64> {
        (0..self.devices())
            .map(|l| {
                self.channel
                    .column(l)
                    .iter()
                    .zip(receiver)
                    .map(|(h, m)| h * m)
                    .sum()
            })
            .collect()
    }

    pub fn to_document(&self) -> ProblemDocument {
        let (n, l) = (self.antennas(), self.devices());
        ProblemDocument {
            channel_re: (0..n).map(|i| (0..l).map(|j| self.channel[(i, j)].re).collect()).collect(),
            channel_im: (0..n).map(|i| (0..l).map(|j| self.channel[(i, j)].im).collect()).collect(),
            weights: self.weights.clone(),
            power: self.power,
            noise_variance: self.noise_variance,
        }
    }

    pub fn from_document(doc: &ProblemDocument) -> Result<Self> {
        let n = doc.channel_re.len();
        let l = doc.channel_re.first().map_or(0, Vec::len);
        if let Some(row) = doc.channel_re.iter().find(|r| r.len() != l) {
            return Err(CoordError::DimensionMismatch {
                what: "channel_re row",
                expected: l,
                found: row.len(),
            });
        }
        let im_present = !doc.channel_im.is_empty();
        if im_present {
            if doc.channel_im.len() != n {
                return Err(CoordError::DimensionMismatch {
                    what: "channel_im rows",
                    expected: n,
                    found: doc.channel_im.len(),
                });
            }
            if let Some(row) = doc.channel_im.iter().find(|r| r.len() != l) {
                return Err(CoordError::DimensionMismatch {
                    what: "channel_im row",
                    expected: l,
                    found: row.len(),
                });
            }
        }
        let channel = CMatrix::from_fn(n, l, |i, j| {
            let im = if im_present { doc.channel_im[i][j] } else { 0.0 };
            Complex64::new(doc.channel_re[i][j], im)
        });
        Self::new(channel, doc.weights.clone(), doc.power, doc.noise_variance)
    }
}

/// JSON form of a problem instance: row-major `N × L` real and imaginary
/// parts of the channel. A missing `channel_im` means a real channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub channel_re: Vec<Vec<f64>>,
    #[serde(default)]
    pub channel_im: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub power: f64,
    pub noise_variance: f64,
}

/// Search bookkeeping attached to a solution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    /// Subsets visited by a greedy descent, root first. Closed-form and
    /// exhaustive solvers record only the final subset.
    pub path: Vec<DeviceSubset>,
    /// Downdates that fell back to a fresh inversion.
    pub downdate_fallbacks: usize,
}

/// A receiver/scaling pair with the devices at full power and its error.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationSolution {
    pub receiver: Vec<Complex64>,
    pub scalings: Vec<Complex64>,
    pub subset: DeviceSubset,
    /// Linear-scale aggregation error.
    pub error: f64,
    /// Subsets whose feasibility was evaluated; zero for closed forms.
    pub check_count: usize,
    pub diagnostics: SolverDiagnostics,
}

impl CoordinationSolution {
    pub fn error_db(&self) -> f64 {
        crate::to_db(self.error)
    }

    /// `max_ℓ |b_ℓ|² / P`.
    pub fn max_power_ratio(&self, power: f64) -> f64 {
        self.scalings.iter().map(|b| b.norm_sqr() / power).fold(0.0, f64::max)
    }
}

/// `Σ_ℓ |m^T h_ℓ b_ℓ − φ_ℓ|² + σ²‖m‖²`.
pub fn aggregation_error(
    problem: &CoordinationProblem,
    receiver: &[Complex64],
    scalings: &[Complex64],
) -> Result<f64> {
    if receiver.len() != problem.antennas() {
        return Err(CoordError::DimensionMismatch {
            what: "receiver",
            expected: problem.antennas(),
            found: receiver.len(),
        });
    }
    if scalings.len() != problem.devices() {
        return Err(CoordError::DimensionMismatch {
            what: "scalings",
            expected: problem.devices(),
            found: scalings.len(),
        });
    }
    let mismatch: f64 = problem
        .projections(receiver)
        .iter()
        .zip(scalings)
        .zip(problem.weights())
        .map(|((p, b), phi)| (p * b - phi).norm_sqr())
        .sum();
    let noise = problem.noise_variance() * receiver.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(mismatch + noise)
}

/// Four devices, five antennas, real channel, `φ_ℓ = 0.25`, `P = 1`.
/// The noise level is left to the caller.
pub fn example_network(noise_variance: f64) -> CoordinationProblem {
    let rows: [&[f64]; 5] = [
        &[0.30, 0.46, 0.39, 0.19],
        &[-0.55, 0.32, -0.52, 0.04],
        &[0.32, -0.14, -0.48, -0.11],
        &[0.72, 0.13, -0.37, 0.18],
        &[0.21, -0.36, -1.32, -0.23],
    ];
    CoordinationProblem::new(CMatrix::from_real_rows(&rows), vec![0.25; 4], 1.0, noise_variance)
        .expect("example network is well formed")
}
