//! Pseudo-spectral solver for incompressible flow on a periodic box, with a
//! fixed-point iteration on the forced diffusion problem and closed-form
//! Gaussian-force references for benchmarking.

pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod picard;
pub mod reference;
pub mod spectral;
pub mod stokes;
pub mod sweep;
pub mod verify;

pub use error::{
    GridError, PicardError, ReferenceError, SpectralError, StokesError, SweepError, VerifyError,
};
pub use field::{ScalarField, SpectralScalarField, SpectralVectorField, VectorField};
pub use grid::{Grid, Wavenumbers};
pub use picard::{
    iterate_to_fixed_point, ContractionReport, FixedPointOutcome, PicardConfig, PicardState,
    PicardStatus,
};
pub use reference::GaussianForceParams;
pub use spectral::SpectralSpace;
pub use stokes::{solve_stokes, ForceSampler, GaussianForce, StokesConfig, Trajectory, ZeroForce};
pub use sweep::{region_report, run_sweep, RegionReport, SweepPlan, SweepRecord, SweepStatus};
pub use verify::{residual_report, NseOptions, ResidualReport};
