//! Error types for the solver library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid resolution {0} must be a power of two and at least 4")]
    BadResolution(usize),
    #[error("box length {0} must be positive and finite")]
    BadBoxLength(f64),
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("input field contains a non-finite value in component {component} at flat index {index}")]
    NonFinite { component: usize, index: usize },
    #[error("spectrum violates conjugate symmetry: max deviation {deviation:.3e} exceeds {tolerance:.3e} x max amplitude")]
    SymmetryViolation { deviation: f64, tolerance: f64 },
    #[error("inverse transform left imaginary residue {residue:.3e} relative, above {tolerance:.3e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
    #[error("norm order {requested} exceeds the supported maximum {max}")]
    NormOrderTooHigh { requested: usize, max: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Error)]
pub enum StokesError {
    #[error("propagation time {0} must be nonnegative")]
    NegativeTime(f64),
    #[error("viscosity {0} must be positive and finite")]
    BadViscosity(f64),
    #[error("force samples must cover [0, {t}] with strictly increasing times; {detail}")]
    BadSampleCoverage { t: f64, detail: String },
    #[error("force sampling failed at tau = {tau}: {detail}")]
    ForceSampleFailed { tau: f64, detail: String },
    #[error("snapshot times must start at 0, strictly increase, and stay within [0, t_end]")]
    BadSnapshotTimes,
    #[error("trajectories disagree in grid or snapshot times")]
    TrajectoryMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum PicardError {
    #[error("trajectories are sampled on different snapshot grids")]
    SnapshotGridMismatch,
    #[error("iteration is not in the Running state")]
    NotRunning,
    #[error("contraction diagnostics need at least {needed} corrections, only {got} recorded")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("bad iteration config: {detail}")]
    BadConfig { detail: String },
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("parameter {name} = {value} must be positive and finite")]
    BadParameter { name: &'static str, value: f64 },
    #[error("incomplete gamma requires a > 0 and x >= 0, got a = {a}, x = {x}")]
    GammaDomain { a: f64, x: f64 },
    #[error("confluent hypergeometric is only provided for (a,c) in {{(1,2),(2,3)}}, got ({a},{c})")]
    UnsupportedPhi { a: u32, c: u32 },
    #[error("force profile time {tau} outside [0, {t_eval}]")]
    TauOutOfRange { tau: f64, t_eval: f64 },
    #[error("adaptive quadrature failed to converge: estimated error {estimate:.3e} above {tol:.3e} at depth {depth}")]
    QuadratureNoConvergence { estimate: f64, tol: f64, depth: usize },
    #[error("quadrature tolerance {0} below the supported minimum 1e-12")]
    TolTooTight(f64),
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad sweep plan: {detail}")]
    BadPlan { detail: String },
    #[error("worker pool setup failed: {0}")]
    Pool(String),
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("residual evaluation needs at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
}
