use thiserror::Error;

/// Errors raised by the coordination solvers and the experiment engine.
///
/// Device indices carried by variants are 0-based; `Display` renders them
/// 1-based to match user-facing I/O.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("singular Gram matrix (reciprocal condition number {rcond:e})")]
    SingularGram { rcond: f64 },

    #[error("downdate pivot {pivot:e} too small")]
    NumericalInstability { pivot: f64 },

    #[error("receiver is orthogonal to the channel of device {}", .device + 1)]
    NullProjection { device: usize },

    #[error("root subset is infeasible (singular Gram of all devices)")]
    RootInfeasible,

    #[error("tree search needs at least as many antennas as devices ({antennas} < {devices})")]
    TooFewAntennas { antennas: usize, devices: usize },

    #[error("no feasible setting exists for this instance")]
    NoFeasibleSetting,

    #[error("instance too large: {devices} devices exceeds the cap of {cap}")]
    InstanceTooLarge { devices: usize, cap: usize },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T, E = CoordError> = std::result::Result<T, E>;
