//! Fixed-point iteration for the incompressible momentum equation.
//!
//! Each iterate solves the forced diffusion problem with the previous
//! iterate's advection term moved into the force. Corrections are solved
//! incrementally: the force update for step l involves only the previous
//! full iterate and the previous correction, so one diffusion solve per
//! step regardless of l.

use std::sync::Arc;

use ndarray::{Array3, Zip};

use crate::error::{PicardError, SpectralError};
use crate::field::SpectralScalarField;
use crate::field::{SpectralVectorField, VectorField};
use crate::spectral::SpectralSpace;
use crate::stokes::{
    merge_time_grids, pressure_from_force, quadrature_nodes, solve_stokes, ForceRecord,
    ForceSampler, StokesConfig, Trajectory,
};

/// Norm ratios below this floor (relative to the first iterate) say nothing
/// about growth; they are skipped when testing for divergence.
const RATIO_FLOOR_REL: f64 = 1e-13;

// ---- advection ------------------------------------------------------------------

/// (a . grad) b, fully dealiased: both inputs truncated by the 2/3 rule,
/// gradients taken spectrally, products formed pointwise, result truncated.
/// Truncation first makes the operation exactly bilinear in (a, b).
pub fn advect_spectral(
    space: &SpectralSpace,
    a: &SpectralVectorField,
    b: &SpectralVectorField,
) -> Result<SpectralVectorField, SpectralError> {
    let mut a_cut = a.clone();
    let mut b_cut = b.clone();
    space.dealias_in_place(&mut a_cut);
    space.dealias_in_place(&mut b_cut);

    let grid = space.grid();
    let a_phys = space.inverse_unchecked(&a_cut);
    let mut out_comps = Vec::with_capacity(3);
    for k in 0..3 {
        let mut prod = Array3::<f64>::zeros(a_phys.component(0).dim());
        for n in 0..3 {
            let db = space.inverse_scalar_unchecked(&SpectralScalarField::from_array(
                grid,
                space.derivative(b_cut.component(k), n),
            ));
            Zip::from(&mut prod)
                .and(a_phys.component(n))
                .and(db.data())
                .for_each(|p, &an, &d| *p += an * d);
        }
        out_comps.push(prod);
    }
    let out = VectorField::from_components(
        grid,
        [
            out_comps.remove(0),
            out_comps.remove(0),
            out_comps.remove(0),
        ],
    );
    // products of very large but finite values can overflow; surface that as
    // an error instead of a bogus spectrum
    let mut out_hat = space.forward(&out)?;
    space.dealias_in_place(&mut out_hat);
    Ok(out_hat)
}

/// Physical-space advection (u . grad) u of a single snapshot.
pub fn nonlinear_term(space: &SpectralSpace, u: &VectorField) -> Result<VectorField, PicardError> {
    let u_hat = space.forward(u)?;
    let adv = advect_spectral(space, &u_hat, &u_hat)?;
    Ok(space.inverse_unchecked(&adv))
}

/// One snapshot of the incremental force update,
///   -(a . grad) b - (b . grad) a + (b . grad) b,
/// with a the full iterate two steps back and b the previous correction.
/// Shared transforms: both inputs are truncated and moved to physical space
/// once, all nine gradient fields of each likewise.
fn correction_force_at(
    space: &SpectralSpace,
    a: &SpectralVectorField,
    b: &SpectralVectorField,
) -> Result<SpectralVectorField, SpectralError> {
    let mut a_cut = a.clone();
    let mut b_cut = b.clone();
    space.dealias_in_place(&mut a_cut);
    space.dealias_in_place(&mut b_cut);

    let grid = space.grid();
    let a_zero = a_cut.max_amplitude() == 0.0;
    let a_phys = space.inverse_unchecked(&a_cut);
    let b_phys = space.inverse_unchecked(&b_cut);

    let deriv = |f: &SpectralVectorField, comp: usize, axis: usize| {
        space.inverse_scalar_unchecked(&SpectralScalarField::from_array(
            grid,
            space.derivative(f.component(comp), axis),
        ))
    };

    let mut comps = Vec::with_capacity(3);
    for k in 0..3 {
        let mut acc = Array3::<f64>::zeros(b_phys.component(0).dim());
        for n in 0..3 {
            let db = deriv(&b_cut, k, n);
            // (b . grad) b, minus (a . grad) b when a is nonzero
            if a_zero {
                Zip::from(&mut acc)
                    .and(b_phys.component(n))
                    .and(db.data())
                    .for_each(|p, &bn, &d| *p += bn * d);
            } else {
                Zip::from(&mut acc)
                    .and(b_phys.component(n))
                    .and(a_phys.component(n))
                    .and(db.data())
                    .for_each(|p, &bn, &an, &d| *p += (bn - an) * d);
                // -(b . grad) a
                let da = deriv(&a_cut, k, n);
                Zip::from(&mut acc)
                    .and(b_phys.component(n))
                    .and(da.data())
                    .for_each(|p, &bn, &d| *p -= bn * d);
            }
        }
        comps.push(acc);
    }
    let out = VectorField::from_components(
        grid,
        [comps.remove(0), comps.remove(0), comps.remove(0)],
    );
    let mut out_hat = space.forward(&out)?;
    space.dealias_in_place(&mut out_hat);
    Ok(out_hat)
}

/// Force update for the next correction, sampled on the shared snapshot grid.
/// `u_prev2` is the full iterate two steps back, `u_star_prev` the previous
/// correction; for the first update pass the zero trajectory and the first
/// iterate.
pub fn force_correction(
    u_prev2: &Trajectory,
    u_star_prev: &Trajectory,
) -> Result<ForceRecord, PicardError> {
    if u_prev2.grid() != u_star_prev.grid() || u_prev2.times() != u_star_prev.times() {
        return Err(PicardError::SnapshotGridMismatch);
    }
    let space = u_star_prev.space();
    let samples = (0..u_star_prev.len())
        .map(|i| {
            correction_force_at(
                space,
                u_prev2.velocity_spectral(i),
                u_star_prev.velocity_spectral(i),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    ForceRecord::new(
        u_star_prev.grid(),
        u_star_prev.times().to_vec(),
        samples,
    )
    .map_err(PicardError::from)
}

// ---- iteration state ------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardStatus {
    Running,
    Converged,
    Diverged,
    MaxIterations,
}

/// Per-correction norms, recorded even when the correction itself is not.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionNorms {
    pub l: usize,
    pub sup: f64,
    pub l2: f64,
}

/// A kept correction: its index, the solved velocity, and the force that
/// produced it.
pub struct CorrectionRecord {
    pub l: usize,
    pub velocity: Trajectory,
    pub force: ForceRecord,
}

#[derive(Debug, Clone)]
pub struct PicardConfig {
    pub max_iterations: usize,
    /// Absolute sup-norm threshold on a correction for convergence.
    pub tol_abs: f64,
    /// Consecutive growing corrections before the run is declared divergent.
    pub divergence_ratio_window: usize,
    /// Extra times the caller wants snapshots at, merged into the quadrature
    /// grid. May be empty.
    pub snapshot_times: Vec<f64>,
    /// Keep every correction trajectory and force record. Costs memory
    /// proportional to the iteration count; required for the reconstruction
    /// diagnostics, not for the iteration itself.
    pub keep_history: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iterations: 50,
            tol_abs: 1e-10,
            divergence_ratio_window: 3,
            snapshot_times: Vec::new(),
            keep_history: true,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self, t_end: f64) -> Result<(), PicardError> {
        if self.max_iterations == 0 {
            return Err(PicardError::BadConfig {
                detail: "max_iterations must be at least 1".into(),
            });
        }
        if !(self.tol_abs.is_finite() && self.tol_abs >= 0.0) {
            return Err(PicardError::BadConfig {
                detail: format!("tol_abs = {} must be finite and nonnegative", self.tol_abs),
            });
        }
        if self.divergence_ratio_window == 0 {
            return Err(PicardError::BadConfig {
                detail: "divergence_ratio_window must be at least 1".into(),
            });
        }
        let tol = 1e-12 * t_end;
        if !self.snapshot_times.windows(2).all(|w| w[0] < w[1])
            || self.snapshot_times.iter().any(|&t| t < 0.0 || t > t_end + tol)
        {
            return Err(PicardError::BadConfig {
                detail: "snapshot_times must strictly increase within [0, t_end]".into(),
            });
        }
        Ok(())
    }
}

/// Iteration state. `u_current` is the iterate u_j; the previous full iterate
/// and the last correction are kept because the next force update needs them.
pub struct PicardState {
    space: Arc<SpectralSpace>,
    config: PicardConfig,
    j: usize,
    status: PicardStatus,
    status_detail: Option<String>,
    u1: Trajectory,
    u_current: Trajectory,
    u_prev_full: Trajectory,
    last_correction: Trajectory,
    corrections: Vec<CorrectionRecord>,
    correction_norms: Vec<CorrectionNorms>,
    u1_sup: f64,
    u1_l2: f64,
}

impl PicardState {
    /// Solve the first iterate (pure forced diffusion from u0) and set up the
    /// recurrence. The first "correction" is u1 itself, measured against the
    /// zero trajectory.
    pub fn initialize(
        space: &Arc<SpectralSpace>,
        u0: &VectorField,
        base_force: &dyn ForceSampler,
        config: PicardConfig,
        stokes: &StokesConfig,
    ) -> Result<Self, PicardError> {
        stokes.validate().map_err(PicardError::from)?;
        config.validate(stokes.t_end)?;

        let tol = 1e-12 * stokes.t_end;
        let uniform = quadrature_nodes(stokes.t_end, stokes.substeps);
        let grid_times = merge_time_grids(&uniform, &config.snapshot_times, tol);

        let mut inner = stokes.clone();
        inner.with_pressure = false;
        let u1 = solve_stokes(space, u0, &inner, base_force, &grid_times)?;
        let u1_sup = u1.sup_norm();
        let u1_l2 = u1.l2_norm();

        let zero = u1.zeros_like();
        Ok(PicardState {
            space: Arc::clone(space),
            config,
            j: 1,
            status: PicardStatus::Running,
            status_detail: None,
            u_current: u1.clone(),
            u_prev_full: zero,
            last_correction: u1.clone(),
            u1,
            corrections: Vec::new(),
            correction_norms: Vec::new(),
            u1_sup,
            u1_l2,
        })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn status(&self) -> PicardStatus {
        self.status
    }

    pub fn status_detail(&self) -> Option<&str> {
        self.status_detail.as_deref()
    }

    pub fn config(&self) -> &PicardConfig {
        &self.config
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    pub fn first_iterate(&self) -> &Trajectory {
        &self.u1
    }

    pub fn current(&self) -> &Trajectory {
        &self.u_current
    }

    pub fn current_mut(&mut self) -> &mut Trajectory {
        &mut self.u_current
    }

    /// Norm of the first iterate against the zero start, in sup and L2.
    pub fn first_iterate_norms(&self) -> (f64, f64) {
        (self.u1_sup, self.u1_l2)
    }

    pub fn corrections(&self) -> &[CorrectionRecord] {
        &self.corrections
    }

    pub fn correction_norms(&self) -> &[CorrectionNorms] {
        &self.correction_norms
    }

    fn ratio_floor(&self) -> f64 {
        self.config.tol_abs.max(RATIO_FLOOR_REL * self.u1_sup)
    }

    fn update_status(&mut self) {
        let norms = &self.correction_norms;
        let last = norms.last().expect("status update follows a step");
        if !last.sup.is_finite() {
            self.status = PicardStatus::Diverged;
            self.status_detail = Some(format!("correction {} is not finite", last.l));
            return;
        }
        if last.sup < self.config.tol_abs {
            self.status = PicardStatus::Converged;
            return;
        }
        let w = self.config.divergence_ratio_window;
        if norms.len() > w {
            let floor = self.ratio_floor();
            let tail = &norms[norms.len() - w - 1..];
            let all_grew = tail
                .windows(2)
                .all(|p| p[0].sup > floor && p[1].sup > p[0].sup);
            if all_grew && last.sup > norms[0].sup {
                self.status = PicardStatus::Diverged;
                self.status_detail = Some(format!(
                    "correction norms grew {} steps in a row, {:.3e} past the first correction {:.3e}",
                    w, last.sup, norms[0].sup
                ));
                return;
            }
        }
        if self.j > self.config.max_iterations {
            self.status = PicardStatus::MaxIterations;
        }
    }
}

/// One incremental step: build the force update from the stored pair, solve
/// for the correction from rest, subtract it from the current iterate, and
/// update the stopping status.
pub fn picard_step_incremental(
    mut state: PicardState,
    stokes: &StokesConfig,
) -> Result<PicardState, PicardError> {
    if state.status != PicardStatus::Running {
        return Err(PicardError::NotRunning);
    }
    let l = state.j + 1;
    // overflow while forming the force products means the iterates blew up
    let force = match force_correction(&state.u_prev_full, &state.last_correction) {
        Ok(f) => f,
        Err(PicardError::Spectral(SpectralError::NonFinite { .. })) => {
            state.status = PicardStatus::Diverged;
            state.status_detail = Some(format!("force update for correction {l} overflowed"));
            return Ok(state);
        }
        Err(e) => return Err(e),
    };

    let mut inner = stokes.clone();
    inner.with_pressure = false;
    inner.project_force = true;
    let rest = VectorField::zeros(state.space.grid());
    let u_star = solve_stokes(
        &state.space,
        &rest,
        &inner,
        &force,
        state.u1.times(),
    )?;

    let sup = if u_star.is_finite() {
        u_star.sup_norm()
    } else {
        f64::INFINITY
    };
    let l2 = if sup.is_finite() { u_star.l2_norm() } else { f64::INFINITY };
    state.correction_norms.push(CorrectionNorms { l, sup, l2 });

    let mut next = state.u_current.clone();
    next.add_scaled(&u_star, -1.0).map_err(PicardError::from)?;
    state.u_prev_full = std::mem::replace(&mut state.u_current, next);

    if state.config.keep_history {
        state.corrections.push(CorrectionRecord {
            l,
            velocity: u_star.clone(),
            force,
        });
    }
    state.last_correction = u_star;
    state.j = l;
    state.update_status();
    Ok(state)
}

/// Full (non-incremental) step: the next iterate is the first iterate minus
/// the diffusion response to the previous iterate's advection term. Used to
/// cross-check the incremental recurrence; one step costs the same either
/// way, but the full form rebuilds the advection of the entire iterate.
pub fn picard_step_full(
    u_prev: &Trajectory,
    u1: &Trajectory,
    base_force: &dyn ForceSampler,
    stokes: &StokesConfig,
) -> Result<Trajectory, PicardError> {
    if u_prev.grid() != u1.grid() || u_prev.times() != u1.times() {
        return Err(PicardError::SnapshotGridMismatch);
    }
    let space = u1.space();
    let times = u1.times().to_vec();
    let samples: Vec<SpectralVectorField> = (0..u_prev.len())
        .map(|i| {
            let v = u_prev.velocity_spectral(i);
            advect_spectral(space, v, v)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut inner = stokes.clone();
    inner.with_pressure = false;
    inner.project_force = true;
    let rest = VectorField::zeros(space.grid());

    let advection = ForceRecord::new(u1.grid(), times.clone(), samples)?;
    let response = solve_stokes(space, &rest, &inner, &advection, &times)?;

    let mut next = u1.clone();
    next.add_scaled(&response, -1.0).map_err(PicardError::from)?;

    if stokes.with_pressure {
        for (i, &t) in times.iter().enumerate() {
            let base = base_force.sample_spectral(t, space)?;
            let eff = base.sub(advection.sample(i));
            next.set_pressure_spectral(i, Some(pressure_from_force(space, &eff)));
        }
    }
    Ok(next)
}

/// Outcome of a full fixed-point run.
pub struct FixedPointOutcome {
    pub state: PicardState,
    /// Present when at least three corrections were recorded.
    pub diagnostics: Option<ContractionReport>,
}

/// Drive the iteration from u0 until it converges, diverges, or runs out of
/// steps. Pressure snapshots for the final iterate come from the base force
/// minus the final iterate's own advection term.
pub fn iterate_to_fixed_point(
    space: &Arc<SpectralSpace>,
    u0: &VectorField,
    base_force: &dyn ForceSampler,
    config: PicardConfig,
    stokes: &StokesConfig,
) -> Result<FixedPointOutcome, PicardError> {
    let mut state = PicardState::initialize(space, u0, base_force, config, stokes)?;
    while state.status == PicardStatus::Running {
        state = picard_step_incremental(state, stokes)?;
    }

    if stokes.with_pressure && state.u_current.is_finite() {
        let times = state.u_current.times().to_vec();
        for (i, &t) in times.iter().enumerate() {
            let base = base_force.sample_spectral(t, space)?;
            let v = state.u_current.velocity_spectral(i);
            let adv = advect_spectral(space, v, v)?;
            let eff = base.sub(&adv);
            let p = pressure_from_force(space, &eff);
            state.u_current.set_pressure_spectral(i, Some(p));
        }
    }

    let diagnostics = if state.correction_norms.len() >= 3 {
        Some(contraction_diagnostics(&state, 1)?)
    } else {
        None
    };
    Ok(FixedPointOutcome { state, diagnostics })
}

// ---- contraction diagnostics ----------------------------------------------------

/// Consecutive-correction norm ratios and the fitted geometric rate; the
/// a-posteriori distance bound when the history is available.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// (l, |u_l*| / |u_{l-1}*|) in the sup norm; the first entry compares
    /// against the first iterate.
    pub alpha_sup: Vec<(usize, f64)>,
    pub alpha_l2: Vec<(usize, f64)>,
    /// Same ratios in the discrete Schwartz norm of the requested order.
    /// Empty when correction history was not kept.
    pub alpha_schwartz: Vec<(usize, f64)>,
    /// exp(slope) of the least-squares line through (l, log |u_l*|_sup).
    pub alpha_fit: f64,
    /// Largest consecutive sup-norm ratio, the first-correction-to-first-
    /// iterate ratio included.
    pub alpha_max: f64,
    /// Distance-to-limit bound check, when history was kept and alpha_max < 1.
    pub rate_bound: Option<RateBoundCheck>,
}

/// For each intermediate iterate u_n the sup distance to the final iterate
/// against the geometric tail bound alpha^n / (1 - alpha) * |u1|.
#[derive(Debug, Clone, Copy)]
pub struct RateBoundCheck {
    pub alpha: f64,
    pub holds: bool,
    /// Smallest bound/error ratio over the iterates checked.
    pub worst_margin: f64,
}

/// Least-squares geometric rate through (l, log norm); NaN when fewer than
/// two positive norms remain.
pub(crate) fn fit_geometric_rate(points: &[(usize, f64)]) -> f64 {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, v)| v > 0.0 && v.is_finite())
        .map(|&(l, v)| (l as f64, v.ln()))
        .collect();
    if usable.len() < 2 {
        return f64::NAN;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in usable {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    (num / den).exp()
}

/// Consecutive ratios of a norm sequence seeded with the first-iterate norm.
pub(crate) fn consecutive_ratios(first: f64, norms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(norms.len());
    let mut prev = first;
    for &(l, v) in norms {
        out.push((l, if prev > 0.0 { v / prev } else { f64::NAN }));
        prev = v;
    }
    out
}

/// Contraction-rate estimates from the recorded norms, and the geometric
/// distance bound when correction history is available. Needs at least three
/// corrections; `schwartz_order` bounds the derivative/moment order of the
/// Schwartz-norm ratios (only computed when history was kept).
pub fn contraction_diagnostics(
    state: &PicardState,
    schwartz_order: usize,
) -> Result<ContractionReport, PicardError> {
    let norms = state.correction_norms();
    if norms.len() < 3 {
        return Err(PicardError::InsufficientHistory {
            needed: 3,
            got: norms.len(),
        });
    }
    let sup_seq: Vec<(usize, f64)> = norms.iter().map(|n| (n.l, n.sup)).collect();
    let l2_seq: Vec<(usize, f64)> = norms.iter().map(|n| (n.l, n.l2)).collect();
    let (u1_sup, u1_l2) = state.first_iterate_norms();

    let alpha_sup = consecutive_ratios(u1_sup, &sup_seq);
    let alpha_l2 = consecutive_ratios(u1_l2, &l2_seq);

    let alpha_schwartz = if state.corrections().is_empty() {
        Vec::new()
    } else {
        let mut seq = Vec::with_capacity(state.corrections().len());
        for rec in state.corrections() {
            let v = rec
                .velocity
                .schwartz_norm(schwartz_order)
                .map_err(PicardError::from)?;
            seq.push((rec.l, v));
        }
        let first = state
            .first_iterate()
            .schwartz_norm(schwartz_order)
            .map_err(PicardError::from)?;
        consecutive_ratios(first, &seq)
    };

    let alpha_fit = fit_geometric_rate(&sup_seq);
    let alpha_max = alpha_sup
        .iter()
        .map(|&(_, r)| r)
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);

    let rate_bound = rate_bound_check(state, alpha_max)?;

    Ok(ContractionReport {
        alpha_sup,
        alpha_l2,
        alpha_schwartz,
        alpha_fit,
        alpha_max,
        rate_bound,
    })
}

/// Reconstruct each intermediate iterate from the kept corrections and
/// compare its distance to the final iterate against
/// alpha^n / (1 - alpha) * |u1|.
fn rate_bound_check(
    state: &PicardState,
    alpha: f64,
) -> Result<Option<RateBoundCheck>, PicardError> {
    if state.corrections().is_empty() || !(alpha > 0.0 && alpha < 1.0) {
        return Ok(None);
    }
    let u_final = state.current();
    let (u1_sup, _) = state.first_iterate_norms();
    let mut partial = state.first_iterate().clone();
    let mut holds = true;
    let mut worst = f64::INFINITY;
    // partial holds u_n after subtracting corrections 2..=n; n starts at 1.
    let mut n = 1usize;
    loop {
        let mut diff = partial.clone();
        diff.add_scaled(u_final, -1.0).map_err(PicardError::from)?;
        let err = diff.sup_norm();
        let bound = alpha.powi(n as i32) / (1.0 - alpha) * u1_sup;
        if err > 0.0 {
            let margin = bound / err;
            worst = worst.min(margin);
            if margin < 1.0 {
                holds = false;
            }
        }
        let Some(rec) = state.corrections().get(n - 1) else {
            break;
        };
        partial.add_scaled(&rec.velocity, -1.0).map_err(PicardError::from)?;
        n += 1;
        if n > state.corrections().len() {
            break;
        }
    }
    Ok(Some(RateBoundCheck {
        alpha,
        holds,
        worst_margin: worst,
    }))
}
