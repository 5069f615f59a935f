//! Linear solve of one iteration step: heat-kernel propagation of the
//! initial data plus Duhamel integration of the forcing, all mode by mode,
//! with spectral pressure recovery.
//!
//! The time axis is discretized by per-mode exponential integration that is
//! exact whenever the force coefficient is linear in tau between samples
//! (second order for smooth forces). At the zero mode the kernel degenerates
//! to the plain trapezoid rule, which keeps the mean-momentum budget exact
//! for linear mean force.

use ndarray::{Array3, Zip};
use rustfft::num_complex::Complex64;
use std::sync::Arc;

use crate::error::StokesError;
use crate::field::{ScalarField, SpectralScalarField, SpectralVectorField, VectorField};
use crate::grid::Grid;
use crate::reference::{force_profile, GaussianForceParams};
use crate::spectral::SpectralSpace;

/// Relative spectral divergence above which initial data is re-projected.
pub const DIVERGENCE_DRIFT_TOL: f64 = 1e-10;

// ---- scalar kernels -------------------------------------------------------

/// (1 - e^{-w}) / w for w >= 0, series under 1e-4.
fn phi1(w: f64) -> f64 {
    if w < 1e-4 {
        1.0 - w / 2.0 + w * w / 6.0 - w * w * w / 24.0
    } else {
        -(-w).exp_m1() / w
    }
}

/// (w - 1 + e^{-w}) / w^2 for w >= 0, series under 1e-3.
fn phi2(w: f64) -> f64 {
    if w < 1e-3 {
        0.5 - w / 6.0 + w * w / 24.0 - w * w * w / 120.0
    } else {
        (w - 1.0 + (-w).exp()) / (w * w)
    }
}

/// Per-mode update weights for one segment length h:
/// state <- decay * state + weight_prev * F_i + weight_curr * F_{i+1}.
struct SegmentCoefficients {
    h: f64,
    decay: Array3<f64>,
    weight_prev: Array3<f64>,
    weight_curr: Array3<f64>,
}

impl SegmentCoefficients {
    fn compute(space: &SpectralSpace, viscosity: f64, h: f64) -> Self {
        let g2 = space.wavenumbers().gamma_sq();
        let decay = g2.mapv(|g| (-viscosity * g * h).exp());
        let weight_prev = g2.mapv(|g| {
            let w = viscosity * g * h;
            h * (phi1(w) - phi2(w))
        });
        let weight_curr = g2.mapv(|g| h * phi2(viscosity * g * h));
        SegmentCoefficients {
            h,
            decay,
            weight_prev,
            weight_curr,
        }
    }
}

fn etd_segment(
    state: &mut SpectralVectorField,
    coefs: &SegmentCoefficients,
    f_prev: &SpectralVectorField,
    f_curr: &SpectralVectorField,
) {
    for k in 0..3 {
        Zip::from(state.component_mut(k))
            .and(&coefs.decay)
            .and(&coefs.weight_prev)
            .and(&coefs.weight_curr)
            .and(f_prev.component(k))
            .and(f_curr.component(k))
            .for_each(|s, &e, &wp, &wc, fp, fc| {
                *s = *s * e + fp * wp + fc * wc;
            });
    }
}

fn check_viscosity(viscosity: f64) -> Result<(), StokesError> {
    if viscosity.is_finite() && viscosity > 0.0 {
        Ok(())
    } else {
        Err(StokesError::BadViscosity(viscosity))
    }
}

// ---- elementary operations -------------------------------------------------

/// Multiply every mode by e^{-nu |gamma|^2 t}. The zero mode passes through.
pub fn heat_propagate(
    space: &SpectralSpace,
    u0: &SpectralVectorField,
    viscosity: f64,
    t: f64,
) -> Result<SpectralVectorField, StokesError> {
    check_viscosity(viscosity)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(StokesError::NegativeTime(t));
    }
    if u0.grid() != space.grid() {
        return Err(crate::error::SpectralError::GridMismatch.into());
    }
    let mut out = u0.clone();
    let g2 = space.wavenumbers().gamma_sq();
    for k in 0..3 {
        Zip::from(out.component_mut(k))
            .and(g2)
            .for_each(|v, &g| *v *= (-viscosity * g * t).exp());
    }
    Ok(out)
}

/// Pressure coefficients from the unprojected instantaneous force:
/// P = i (gamma . F) / |gamma|^2, zero at the zero mode. Uses the
/// differentiation symbol so the resulting gradient cancels exactly the part
/// of the force the projection removes.
pub fn pressure_from_force(
    space: &SpectralSpace,
    force: &SpectralVectorField,
) -> SpectralScalarField {
    let gamma = space.wavenumbers().gamma_diff().to_vec();
    let n = space.grid().n();
    let mut out = SpectralScalarField::zeros(space.grid());
    for j0 in 0..n {
        for j1 in 0..n {
            for j2 in 0..n {
                let g = [gamma[j0], gamma[j1], gamma[j2]];
                let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                if g2 == 0.0 {
                    continue;
                }
                let dot = force.component(0)[[j0, j1, j2]] * g[0]
                    + force.component(1)[[j0, j1, j2]] * g[1]
                    + force.component(2)[[j0, j1, j2]] * g[2];
                out.data_mut()[[j0, j1, j2]] = Complex64::new(0.0, 1.0) * dot / g2;
            }
        }
    }
    out
}

/// Accumulate int_0^t e^{-nu |gamma|^2 (t - tau)} F(tau) d tau from streamed
/// samples in ascending tau. Samples beyond t contribute up to t only, with
/// the force interpolated linearly onto the cut.
pub fn duhamel_integrate_streamed<I>(
    space: &SpectralSpace,
    samples: I,
    viscosity: f64,
    t: f64,
) -> Result<SpectralVectorField, StokesError>
where
    I: IntoIterator<Item = Result<(f64, SpectralVectorField), StokesError>>,
{
    check_viscosity(viscosity)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(StokesError::NegativeTime(t));
    }
    let cover = |detail: &str| StokesError::BadSampleCoverage {
        t,
        detail: detail.to_string(),
    };
    let tol = 1e-12 * t.max(1.0);
    let mut iter = samples.into_iter();
    let (tau0, f0) = match iter.next() {
        Some(first) => first?,
        None => return Err(cover("no samples given")),
    };
    if f0.grid() != space.grid() {
        return Err(crate::error::SpectralError::GridMismatch.into());
    }
    if tau0.abs() > tol {
        return Err(cover("first sample is not at tau = 0"));
    }
    let mut state = SpectralVectorField::zeros(space.grid());
    if t == 0.0 {
        return Ok(state);
    }
    let mut coefs: Option<SegmentCoefficients> = None;
    let mut prev_tau = 0.0f64;
    let mut prev = f0;
    for item in iter {
        let (tau, f) = item?;
        if f.grid() != space.grid() {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        if tau <= prev_tau {
            return Err(cover("sample times are not strictly increasing"));
        }
        let clipped = tau >= t;
        let (h, f_end) = if clipped && (tau - t) > tol {
            // interpolate the force onto the cut at t
            let theta = (t - prev_tau) / (tau - prev_tau);
            let mut cut = prev.clone();
            cut.add_scaled(&f, theta);
            cut.add_scaled(&prev, -theta);
            (t - prev_tau, cut)
        } else {
            (tau - prev_tau, f)
        };
        if coefs.as_ref().map(|c| c.h) != Some(h) {
            coefs = Some(SegmentCoefficients::compute(space, viscosity, h));
        }
        etd_segment(&mut state, coefs.as_ref().unwrap(), &prev, &f_end);
        if clipped {
            return Ok(state);
        }
        prev_tau = tau;
        prev = f_end;
    }
    if prev_tau + tol < t {
        return Err(cover("samples end before t"));
    }
    Ok(state)
}

/// Slice form of the streamed integrator.
pub fn duhamel_integrate(
    space: &SpectralSpace,
    samples: &[(f64, SpectralVectorField)],
    viscosity: f64,
    t: f64,
) -> Result<SpectralVectorField, StokesError> {
    duhamel_integrate_streamed(
        space,
        samples.iter().map(|(tau, f)| Ok((*tau, f.clone()))),
        viscosity,
        t,
    )
}

// ---- force sampling ---------------------------------------------------------

/// Source of force coefficients for the time march. Calls arrive serially in
/// ascending tau within one solve; implementations must be shareable across
/// threads so independent solves can run concurrently.
pub trait ForceSampler: Sync {
    fn sample_spectral(
        &self,
        tau: f64,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError>;
}

/// No forcing.
pub struct ZeroForce;

impl ForceSampler for ZeroForce {
    fn sample_spectral(
        &self,
        _tau: f64,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError> {
        Ok(SpectralVectorField::zeros(space.grid()))
    }
}

/// The Gaussian benchmark force: amplitude F, envelope e^{-mu^2 r^2} along
/// axis 1, time profile [4 mu^2 nu (t_eval - tau) + 1]^{-1/2}.
pub struct GaussianForce {
    params: GaussianForceParams,
    t_eval: f64,
    template: Option<SpectralVectorField>,
}

impl GaussianForce {
    pub fn new(params: GaussianForceParams, t_eval: f64) -> Self {
        GaussianForce {
            params,
            t_eval,
            template: None,
        }
    }

    /// Transform the spatial envelope once; sampling then scales the stored
    /// spectrum by the profile instead of redoing the FFT per tau.
    pub fn precompute(mut self, space: &SpectralSpace) -> Result<Self, StokesError> {
        self.template = Some(self.envelope_spectrum(space)?);
        Ok(self)
    }

    pub fn params(&self) -> &GaussianForceParams {
        &self.params
    }

    fn envelope_spectrum(
        &self,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError> {
        let mu = self.params.width();
        let f = self.params.amplitude();
        let phys = VectorField::from_fn(space.grid(), |x, y, z| {
            [f * (-mu * mu * (x * x + y * y + z * z)).exp(), 0.0, 0.0]
        });
        Ok(space.forward(&phys)?)
    }
}

impl ForceSampler for GaussianForce {
    fn sample_spectral(
        &self,
        tau: f64,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError> {
        let profile = force_profile(&self.params, self.t_eval, tau).map_err(|e| {
            StokesError::ForceSampleFailed {
                tau,
                detail: e.to_string(),
            }
        })?;
        let mut out = match &self.template {
            Some(t) if t.grid() == space.grid() => t.clone(),
            _ => self.envelope_spectrum(space)?,
        };
        for k in 0..3 {
            out.component_mut(k).mapv_inplace(|v| v * profile);
        }
        Ok(out)
    }
}

/// Force given as a physical-space closure of (tau, grid).
pub struct PhysicalForce<F> {
    f: F,
}

impl<F> PhysicalForce<F>
where
    F: Fn(f64, Grid) -> VectorField + Sync,
{
    pub fn new(f: F) -> Self {
        PhysicalForce { f }
    }
}

impl<F> ForceSampler for PhysicalForce<F>
where
    F: Fn(f64, Grid) -> VectorField + Sync,
{
    fn sample_spectral(
        &self,
        tau: f64,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError> {
        Ok(space.forward(&(self.f)(tau, space.grid()))?)
    }
}

/// Force known only at fixed times, stored spectrally. Sampling looks the
/// time up exactly (to a relative tolerance); nothing is interpolated.
pub struct ForceRecord {
    grid: Grid,
    times: Vec<f64>,
    samples: Vec<SpectralVectorField>,
}

impl ForceRecord {
    pub fn new(
        grid: Grid,
        times: Vec<f64>,
        samples: Vec<SpectralVectorField>,
    ) -> Result<Self, StokesError> {
        if times.is_empty() || times.len() != samples.len() {
            return Err(StokesError::BadSampleCoverage {
                t: f64::NAN,
                detail: "record needs equally many times and samples, at least one".into(),
            });
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(StokesError::BadSampleCoverage {
                t: f64::NAN,
                detail: "record times must strictly increase".into(),
            });
        }
        if samples.iter().any(|s| s.grid() != grid) {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        Ok(ForceRecord {
            grid,
            times,
            samples,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample(&self, i: usize) -> &SpectralVectorField {
        &self.samples[i]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut SpectralVectorField {
        &mut self.samples[i]
    }

    fn lookup(&self, tau: f64) -> Option<usize> {
        let tol = 1e-9 * self.times.last().unwrap().abs().max(1.0);
        let idx = self
            .times
            .partition_point(|&t| t < tau - tol);
        (idx < self.times.len() && (self.times[idx] - tau).abs() <= tol).then_some(idx)
    }
}

impl ForceSampler for ForceRecord {
    fn sample_spectral(
        &self,
        tau: f64,
        space: &SpectralSpace,
    ) -> Result<SpectralVectorField, StokesError> {
        if self.grid != space.grid() {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        match self.lookup(tau) {
            Some(i) => Ok(self.samples[i].clone()),
            None => Err(StokesError::ForceSampleFailed {
                tau,
                detail: "time is not in the record".into(),
            }),
        }
    }
}

// ---- the full solve -----------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StokesConfig {
    pub viscosity: f64,
    pub t_end: f64,
    pub substeps: usize,
    /// Apply the divergence-free projection to force samples before the
    /// march. Off, the solve is the raw componentwise response, which is what
    /// the closed-form benchmark describes.
    pub project_force: bool,
    /// Compute pressure snapshots from the instantaneous unprojected force.
    pub with_pressure: bool,
}

impl StokesConfig {
    pub fn new(viscosity: f64, t_end: f64, substeps: usize) -> Self {
        StokesConfig {
            viscosity,
            t_end,
            substeps,
            project_force: true,
            with_pressure: true,
        }
    }

    pub fn validate(&self) -> Result<(), StokesError> {
        check_viscosity(self.viscosity)?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(StokesError::NegativeTime(self.t_end));
        }
        if self.substeps == 0 {
            return Err(StokesError::BadSampleCoverage {
                t: self.t_end,
                detail: "substeps must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Velocity (and optionally pressure) coefficients at the snapshot times of
/// one solve. Spectral storage is primary; physical fields materialize on
/// demand.
#[derive(Debug, Clone)]
pub struct Trajectory {
    space: Arc<SpectralSpace>,
    viscosity: f64,
    times: Vec<f64>,
    velocity: Vec<SpectralVectorField>,
    pressure: Vec<Option<SpectralScalarField>>,
    initial_divergence: f64,
    initial_projected: bool,
}

impl Trajectory {
    pub fn from_parts(
        space: Arc<SpectralSpace>,
        viscosity: f64,
        times: Vec<f64>,
        velocity: Vec<SpectralVectorField>,
        pressure: Vec<Option<SpectralScalarField>>,
    ) -> Result<Self, StokesError> {
        if times.is_empty()
            || times[0] != 0.0
            || !times.windows(2).all(|w| w[0] < w[1])
        {
            return Err(StokesError::BadSnapshotTimes);
        }
        if velocity.len() != times.len() || pressure.len() != times.len() {
            return Err(StokesError::TrajectoryMismatch);
        }
        if velocity.iter().any(|v| v.grid() != space.grid()) {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        Ok(Trajectory {
            space,
            viscosity,
            times,
            velocity,
            pressure,
            initial_divergence: 0.0,
            initial_projected: false,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    pub fn grid(&self) -> Grid {
        self.space.grid()
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn velocity_spectral(&self, i: usize) -> &SpectralVectorField {
        &self.velocity[i]
    }

    pub fn pressure_spectral(&self, i: usize) -> Option<&SpectralScalarField> {
        self.pressure[i].as_ref()
    }

    pub fn set_pressure_spectral(&mut self, i: usize, p: Option<SpectralScalarField>) {
        self.pressure[i] = p;
    }

    /// Physical velocity snapshot. Solver-produced spectra are symmetric by
    /// construction, so this skips the reality checks.
    pub fn velocity(&self, i: usize) -> VectorField {
        self.space.inverse_unchecked(&self.velocity[i])
    }

    pub fn pressure(&self, i: usize) -> Option<ScalarField> {
        self.pressure[i]
            .as_ref()
            .map(|p| self.space.inverse_scalar_unchecked(p))
    }

    /// Relative divergence the supplied initial data carried, and whether it
    /// was re-projected before the march.
    pub fn initial_divergence(&self) -> f64 {
        self.initial_divergence
    }

    pub fn initial_projected(&self) -> bool {
        self.initial_projected
    }

    pub fn is_finite(&self) -> bool {
        self.velocity.iter().all(|v| {
            v.components()
                .iter()
                .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        })
    }

    /// Largest physical sup norm over the snapshots.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.velocity(i).sup_norm())
            .fold(0.0, f64::max)
    }

    /// Largest discrete L2 norm over the snapshots (computed spectrally).
    pub fn l2_norm(&self) -> f64 {
        self.velocity
            .iter()
            .map(|v| self.space.l2_norm_spectral(v))
            .fold(0.0, f64::max)
    }

    pub fn schwartz_norm(&self, p: usize) -> Result<f64, StokesError> {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            worst = worst.max(self.space.schwartz_norm(&self.velocity(i), p)?);
        }
        Ok(worst)
    }

    /// Worst relative spectral divergence over the snapshots.
    pub fn max_divergence_residual(&self) -> f64 {
        self.velocity
            .iter()
            .map(|v| relative_divergence(&self.space, v))
            .fold(0.0, f64::max)
    }

    /// In-place linear combination with a trajectory on the same snapshot
    /// grid. Pressures do not combine linearly across iterates and are
    /// dropped.
    pub fn add_scaled(&mut self, other: &Trajectory, factor: f64) -> Result<(), StokesError> {
        if self.grid() != other.grid() || self.times != other.times {
            return Err(StokesError::TrajectoryMismatch);
        }
        for (mine, theirs) in self.velocity.iter_mut().zip(&other.velocity) {
            mine.add_scaled(theirs, factor);
        }
        for p in &mut self.pressure {
            *p = None;
        }
        Ok(())
    }

    /// Zero trajectory on the same snapshot grid.
    pub fn zeros_like(&self) -> Trajectory {
        Trajectory {
            space: Arc::clone(&self.space),
            viscosity: self.viscosity,
            times: self.times.clone(),
            velocity: self
                .times
                .iter()
                .map(|_| SpectralVectorField::zeros(self.grid()))
                .collect(),
            pressure: self.times.iter().map(|_| None).collect(),
            initial_divergence: 0.0,
            initial_projected: false,
        }
    }
}

/// max |gamma . U| over max |gamma| |U|, both over all modes.
pub fn relative_divergence(space: &SpectralSpace, modes: &SpectralVectorField) -> f64 {
    let div = space.spectral_divergence(modes);
    let num = div.data().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let g2 = space.wavenumbers().gamma_sq();
    let mut den = 0.0f64;
    for k in 0..3 {
        Zip::from(modes.component(k)).and(g2).for_each(|v, &g| {
            den = den.max(g.sqrt() * v.norm());
        });
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Sorted union of two ascending time lists; near-coincident entries (within
/// tol) collapse to the value from `a`.
pub fn merge_time_grids(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if (x - y).abs() <= tol {
                    i += 1;
                    j += 1;
                    x
                } else if x < y {
                    i += 1;
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        if out.last().is_none_or(|&l| next - l > tol) {
            out.push(next);
        }
    }
    out
}

/// Uniform quadrature nodes 0, t/S, ..., t.
pub fn quadrature_nodes(t_end: f64, substeps: usize) -> Vec<f64> {
    (0..=substeps)
        .map(|i| i as f64 * t_end / substeps as f64)
        .collect()
}

/// March the forced diffusion problem from u0 and record the snapshots.
/// Quadrature nodes are the uniform substep grid merged with the snapshot
/// times, so snapshots land on nodes exactly.
pub fn solve_stokes(
    space: &Arc<SpectralSpace>,
    u0: &VectorField,
    config: &StokesConfig,
    force: &dyn ForceSampler,
    snapshot_times: &[f64],
) -> Result<Trajectory, StokesError> {
    config.validate()?;
    let tol = 1e-12 * config.t_end;
    if snapshot_times.is_empty()
        || snapshot_times[0] != 0.0
        || !snapshot_times.windows(2).all(|w| w[0] < w[1])
        || *snapshot_times.last().unwrap() > config.t_end + tol
    {
        return Err(StokesError::BadSnapshotTimes);
    }
    let t_last = *snapshot_times.last().unwrap();

    let mut state = space.forward(u0)?;
    let initial_divergence = relative_divergence(space, &state);
    let initial_projected = initial_divergence > DIVERGENCE_DRIFT_TOL;
    if initial_projected {
        space.leray_project_in_place(&mut state);
    }

    let uniform = quadrature_nodes(config.t_end, config.substeps);
    let mut nodes = merge_time_grids(&uniform, snapshot_times, tol);
    while nodes.last().is_some_and(|&last| last > t_last + tol) {
        nodes.pop();
    }

    let mut times = Vec::with_capacity(snapshot_times.len());
    let mut velocity = Vec::with_capacity(snapshot_times.len());
    let mut pressure = Vec::with_capacity(snapshot_times.len());
    let mut next_snapshot = 0usize;

    let mut record = |tau: f64,
                      state: &SpectralVectorField,
                      raw_force: &SpectralVectorField,
                      next_snapshot: &mut usize| {
        if *next_snapshot < snapshot_times.len()
            && (snapshot_times[*next_snapshot] - tau).abs() <= tol
        {
            times.push(snapshot_times[*next_snapshot]);
            velocity.push(state.clone());
            pressure.push(
                config
                    .with_pressure
                    .then(|| pressure_from_force(space, raw_force)),
            );
            *next_snapshot += 1;
        }
    };

    let raw0 = force.sample_spectral(0.0, space)?;
    if raw0.grid() != space.grid() {
        return Err(crate::error::SpectralError::GridMismatch.into());
    }
    record(0.0, &state, &raw0, &mut next_snapshot);
    let mut f_prev = if config.project_force {
        space.leray_project(&raw0)
    } else {
        raw0
    };

    let mut coefs: Option<SegmentCoefficients> = None;
    for pair in nodes.windows(2) {
        let (tau0, tau1) = (pair[0], pair[1]);
        let h = tau1 - tau0;
        let raw = force.sample_spectral(tau1, space)?;
        if raw.grid() != space.grid() {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        let f_curr = if config.project_force {
            space.leray_project(&raw)
        } else {
            raw.clone()
        };
        if coefs.as_ref().map(|c| c.h) != Some(h) {
            coefs = Some(SegmentCoefficients::compute(space, config.viscosity, h));
        }
        etd_segment(&mut state, coefs.as_ref().unwrap(), &f_prev, &f_curr);
        record(tau1, &state, &raw, &mut next_snapshot);
        f_prev = f_curr;
    }

    if times.len() != snapshot_times.len() {
        return Err(StokesError::BadSnapshotTimes);
    }
    let mut traj = Trajectory::from_parts(
        Arc::clone(space),
        config.viscosity,
        times,
        velocity,
        pressure,
    )?;
    traj.initial_divergence = initial_divergence;
    traj.initial_projected = initial_projected;
    Ok(traj)
}
