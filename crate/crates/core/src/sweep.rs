//! Convergence-region exploration over the (F, mu, nu) parameter space of
//! the Gaussian-force problem.
//!
//! Each grid point runs the full fixed-point iteration from rest and is
//! classified by its stopping status; the empirical region is then compared
//! against the closed-form estimate ratio F / (mu^4 nu) < 1. A point failing
//! for any incidental reason (solver error, panic) is recorded as
//! Inconclusive so one bad corner never aborts a long sweep.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::SweepError;
use crate::field::VectorField;
use crate::grid::Grid;
use crate::picard::{
    consecutive_ratios, iterate_to_fixed_point, PicardConfig, PicardStatus,
};
use crate::reference::{convergence_ratio, GaussianForceParams};
use crate::spectral::SpectralSpace;
use crate::stokes::{ForceSampler, GaussianForce, StokesConfig, ZeroForce};

/// Contraction rates this close to 1 do not decide the point either way.
pub const ALPHA_BAND_LO: f64 = 0.95;
pub const ALPHA_BAND_HI: f64 = 1.05;

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub force_values: Vec<f64>,
    pub width_values: Vec<f64>,
    pub viscosity_values: Vec<f64>,
    /// Spatial resolution per axis for every point.
    pub grid_n: usize,
    /// Box edge length is this coefficient over the width parameter mu.
    pub box_coeff: f64,
    pub t_end: f64,
    pub substeps: usize,
    pub max_iterations: usize,
    pub tol_abs: f64,
    /// Worker threads; 0 uses the process-wide pool.
    pub workers: usize,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            force_values: Vec::new(),
            width_values: Vec::new(),
            viscosity_values: Vec::new(),
            grid_n: 32,
            box_coeff: 10.0,
            t_end: 1.0,
            substeps: 16,
            max_iterations: 30,
            tol_abs: 1e-10,
            workers: 0,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |detail: String| Err(SweepError::BadPlan { detail });
        for (name, axis) in [
            ("force", &self.force_values),
            ("width", &self.width_values),
            ("viscosity", &self.viscosity_values),
        ] {
            if axis.is_empty() {
                return bad(format!("{name} axis has no samples"));
            }
            let nonneg_ok = name == "force";
            if axis
                .iter()
                .any(|&v| !v.is_finite() || v < 0.0 || (v == 0.0 && !nonneg_ok))
            {
                return bad(format!("{name} axis values must be positive and finite"));
            }
        }
        if Grid::new(self.grid_n, 1.0).is_err() {
            return bad(format!("grid_n = {} is not a usable resolution", self.grid_n));
        }
        if !(self.box_coeff.is_finite() && self.box_coeff > 0.0) {
            return bad(format!("box_coeff = {} must be positive", self.box_coeff));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.substeps == 0 || self.max_iterations == 0 {
            return bad("substeps and max_iterations must be at least 1".into());
        }
        if !(self.tol_abs.is_finite() && self.tol_abs >= 0.0) {
            return bad(format!("tol_abs = {} must be nonnegative", self.tol_abs));
        }
        Ok(())
    }

    /// Parameter tuples in record order: force outermost, viscosity innermost.
    pub fn tuples(&self) -> Vec<(f64, f64, f64)> {
        let mut out =
            Vec::with_capacity(self.force_values.len() * self.width_values.len() * self.viscosity_values.len());
        for &f in &self.force_values {
            for &mu in &self.width_values {
                for &nu in &self.viscosity_values {
                    out.push((f, mu, nu));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepStatus {
    Converged,
    Diverged,
    Inconclusive,
}

impl std::fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepStatus::Converged => "converged",
            SweepStatus::Diverged => "diverged",
            SweepStatus::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub force_amplitude: f64,
    pub width: f64,
    pub viscosity: f64,
    /// The closed-form boundary estimate F / (mu^4 nu).
    pub estimate_ratio: f64,
    pub status: SweepStatus,
    /// Why the point is Inconclusive, or the divergence detail.
    pub reason: Option<String>,
    pub iterations_used: usize,
    /// Largest observed consecutive correction-norm ratio.
    pub max_alpha: f64,
    pub final_correction_norm: f64,
    pub wall_time_s: f64,
}

fn run_point(plan: &SweepPlan, f: f64, mu: f64, nu: f64) -> SweepRecord {
    let start = Instant::now();
    let ratio = if f > 0.0 {
        GaussianForceParams::new(f, mu, nu)
            .map(|p| convergence_ratio(&p))
            .unwrap_or(f64::NAN)
    } else {
        0.0
    };
    let mut record = SweepRecord {
        force_amplitude: f,
        width: mu,
        viscosity: nu,
        estimate_ratio: ratio,
        status: SweepStatus::Inconclusive,
        reason: None,
        iterations_used: 0,
        max_alpha: f64::NAN,
        final_correction_norm: f64::NAN,
        wall_time_s: 0.0,
    };

    let outcome = catch_unwind(AssertUnwindSafe(|| point_outcome(plan, f, mu, nu)));
    match outcome {
        Ok(Ok(p)) => {
            record.status = p.status;
            record.reason = p.reason;
            record.iterations_used = p.iterations_used;
            record.max_alpha = p.max_alpha;
            record.final_correction_norm = p.final_correction_norm;
        }
        Ok(Err(detail)) => {
            record.reason = Some(detail);
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            record.reason = Some(format!("panicked: {msg}"));
        }
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    record
}

struct PointOutcome {
    status: SweepStatus,
    reason: Option<String>,
    iterations_used: usize,
    max_alpha: f64,
    final_correction_norm: f64,
}

fn point_outcome(plan: &SweepPlan, f: f64, mu: f64, nu: f64) -> Result<PointOutcome, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let grid = Grid::new(plan.grid_n, plan.box_coeff / mu).map_err(|e| err(&e))?;
    let space = Arc::new(SpectralSpace::new(grid));

    let force: Box<dyn ForceSampler> = if f == 0.0 {
        Box::new(ZeroForce)
    } else {
        let params = GaussianForceParams::new(f, mu, nu).map_err(|e| err(&e))?;
        Box::new(
            GaussianForce::new(params, plan.t_end)
                .precompute(&space)
                .map_err(|e| err(&e))?,
        )
    };

    let mut stokes = StokesConfig::new(nu, plan.t_end, plan.substeps);
    stokes.with_pressure = false;
    let config = PicardConfig {
        max_iterations: plan.max_iterations,
        tol_abs: plan.tol_abs,
        keep_history: false,
        ..PicardConfig::default()
    };
    let rest = VectorField::zeros(grid);
    let out = iterate_to_fixed_point(&space, &rest, force.as_ref(), config, &stokes)
        .map_err(|e| err(&e))?;
    let state = out.state;

    let norms = state.correction_norms();
    let (u1_sup, _) = state.first_iterate_norms();
    let seq: Vec<(usize, f64)> = norms.iter().map(|n| (n.l, n.sup)).collect();
    let max_alpha = consecutive_ratios(u1_sup, &seq)
        .iter()
        .map(|&(_, r)| r)
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);
    let final_norm = norms.last().map_or(0.0, |n| n.sup);
    let in_band = (ALPHA_BAND_LO..=ALPHA_BAND_HI).contains(&max_alpha);

    let (status, reason) = match state.status() {
        PicardStatus::Converged if in_band => (
            SweepStatus::Inconclusive,
            Some(format!("contraction rate {max_alpha:.3} within the boundary band")),
        ),
        PicardStatus::Converged => (SweepStatus::Converged, None),
        PicardStatus::Diverged if in_band => (
            SweepStatus::Inconclusive,
            Some(format!("growth rate {max_alpha:.3} within the boundary band")),
        ),
        PicardStatus::Diverged => (
            SweepStatus::Diverged,
            state.status_detail().map(str::to_owned),
        ),
        PicardStatus::MaxIterations => (
            SweepStatus::Inconclusive,
            Some(format!(
                "undecided after {} iterations (last correction {final_norm:.3e})",
                plan.max_iterations
            )),
        ),
        PicardStatus::Running => (
            SweepStatus::Inconclusive,
            Some("iteration did not reach a stopping state".into()),
        ),
    };

    Ok(PointOutcome {
        status,
        reason,
        iterations_used: norms.len(),
        max_alpha,
        final_correction_norm: final_norm,
    })
}

/// Run every parameter tuple and return the records in tuple order. Points
/// execute in parallel; contents are deterministic for a given plan
/// regardless of worker count (wall times excepted).
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRecord>, SweepError> {
    plan.validate()?;
    let tuples = plan.tuples();
    let work = || {
        tuples
            .par_iter()
            .map(|&(f, mu, nu)| run_point(plan, f, mu, nu))
            .collect::<Vec<_>>()
    };
    let records = if plan.workers == 0 {
        work()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?;
        pool.install(work)
    };
    Ok(records)
}

// ---- region summary ---------------------------------------------------------

/// Cross-tabulation of the estimate classification (ratio < 1 is inside)
/// against the empirical statuses, plus ray-ordering sanity flags.
#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    /// [inside, outside] x [converged, diverged, inconclusive].
    pub counts: [[usize; 3]; 2],
    /// Fraction of estimate-inside points that converged empirically.
    pub inside_converged_fraction: f64,
    /// Rays (width, viscosity) where a diverged point precedes a converged
    /// one as the force amplitude increases.
    pub interleaved_rays: Vec<(f64, f64)>,
}

pub fn region_report(records: &[SweepRecord]) -> RegionReport {
    let mut counts = [[0usize; 3]; 2];
    for r in records {
        // NaN ratios land outside
        let row = if r.estimate_ratio < 1.0 { 0 } else { 1 };
        let col = match r.status {
            SweepStatus::Converged => 0,
            SweepStatus::Diverged => 1,
            SweepStatus::Inconclusive => 2,
        };
        counts[row][col] += 1;
    }
    let inside_total: usize = counts[0].iter().sum();
    let inside_converged_fraction = if inside_total == 0 {
        f64::NAN
    } else {
        counts[0][0] as f64 / inside_total as f64
    };

    // group by (width, viscosity), keep record order (force ascending when
    // the plan's force axis is)
    let mut rays: Vec<((f64, f64), Vec<&SweepRecord>)> = Vec::new();
    for r in records {
        let key = (r.width, r.viscosity);
        match rays.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => rays.push((key, vec![r])),
        }
    }
    let mut interleaved = Vec::new();
    for (key, ray) in &rays {
        let mut sorted: Vec<&&SweepRecord> = ray.iter().collect();
        sorted.sort_by(|a, b| a.force_amplitude.total_cmp(&b.force_amplitude));
        let first_diverged = sorted
            .iter()
            .position(|r| r.status == SweepStatus::Diverged);
        let last_converged = sorted
            .iter()
            .rposition(|r| r.status == SweepStatus::Converged);
        if let (Some(d), Some(c)) = (first_diverged, last_converged) {
            if d < c {
                interleaved.push(*key);
            }
        }
    }

    RegionReport {
        counts,
        inside_converged_fraction,
        interleaved_rays: interleaved,
    }
}
