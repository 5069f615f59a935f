//! Shared plumbing for the subcommands: guarded output writing, the run
//! manifest, and the residual report format. The report is always computed
//! from the snapshot files as written to disk, so an independent rerun of the
//! verify command reproduces it byte for byte.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spicard::picard::advect_spectral;
use spicard::stokes::pressure_from_force;
use spicard::verify::{energy_bound, EnergyBound};
use spicard::{
    residual_report, ForceSampler, GaussianForce, GaussianForceParams, NseOptions, PicardState,
    PicardStatus, ResidualReport, SpectralSpace, StokesConfig, Trajectory, ZeroForce,
};

use crate::config::{GridSection, PicardSection};
use crate::snapshot::read_snapshot;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Removes everything it created unless committed, so a failed run leaves no
/// partial artifacts behind.
pub struct RunGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl RunGuard {
    pub fn new() -> Self {
        RunGuard {
            files: Vec::new(),
            dirs: Vec::new(),
            committed: false,
        }
    }

    /// Create a directory, parents included, adopting every level that did
    /// not already exist.
    pub fn make_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut probe = dir;
        while !probe.exists() {
            missing.push(probe.to_owned());
            match probe.parent() {
                Some(p) if p != probe => probe = p,
                _ => break,
            }
        }
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        // shallowest first, so reverse removal order is deepest first
        missing.reverse();
        self.dirs.extend(missing);
        Ok(())
    }

    /// Register the path before the write so a torn write still gets cleaned.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.files.push(path.to_owned());
        std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn track(&mut self, path: &Path) {
        self.files.push(path.to_owned());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for RunGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        // deepest first; remove_dir refuses non-empty dirs, which is wanted
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

impl Default for RunGuard {
    fn default() -> Self {
        Self::new()
    }
}

// ---- manifest -----------------------------------------------------------

/// Everything needed to reproduce a run and re-derive its report from the
/// snapshot files. No clocks or hostnames: two runs of the same config write
/// identical manifests except for the outcome block.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario: String,
    pub flags: Flags,
    pub grid: ManifestGrid,
    pub stokes: ManifestStokes,
    pub picard: ManifestPicard,
    pub force: Option<ManifestForce>,
    pub initial: ManifestInitial,
    pub outcome: Outcome,
    pub snapshots: Vec<SnapshotEntry>,
    pub artifacts: Artifacts,
}

/// Fixed algorithmic choices baked into this build, recorded so an archived
/// manifest says which conventions produced its numbers.
#[derive(Debug, Serialize, Deserialize)]
pub struct Flags {
    pub zero_mode_policy: String,
    pub pressure_zero_mode: String,
    pub quadrature: String,
    pub dealias_rule: String,
    pub time_stencil: String,
    pub normalization: String,
}

impl Flags {
    pub fn current() -> Self {
        Flags {
            zero_mode_policy: "passthrough".into(),
            pressure_zero_mode: "zero".into(),
            quadrature: "uniform_etd2_trapezoid".into(),
            dealias_rule: "two_thirds_truncation".into(),
            time_stencil: "three_point_second_order".into(),
            normalization: "max_term_relative".into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestGrid {
    pub n: usize,
    pub box_length: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestStokes {
    pub viscosity: f64,
    pub t_end: f64,
    pub substeps: usize,
    pub project_force: bool,
    pub with_pressure: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestPicard {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub divergence_window: usize,
    pub snapshot_times: Vec<f64>,
    pub keep_history: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestForce {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestInitial {
    pub kind: String,
    pub amplitude: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Outcome {
    pub status: String,
    pub status_detail: Option<String>,
    pub iterations: usize,
    pub first_iterate_sup: f64,
    pub first_iterate_l2: f64,
    pub correction_sup: Vec<f64>,
    pub correction_l2: Vec<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_fit: Option<f64>,
    pub rate_bound_holds: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Artifacts {
    pub diagnostics: String,
    pub report: String,
}

pub fn status_name(status: PicardStatus) -> &'static str {
    match status {
        PicardStatus::Running => "running",
        PicardStatus::Converged => "converged",
        PicardStatus::Diverged => "diverged",
        PicardStatus::MaxIterations => "max_iterations",
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse manifest {}", path.display()))
    }

    pub fn grid_section(&self) -> GridSection {
        GridSection {
            n: self.grid.n,
            box_length: self.grid.box_length,
        }
    }

    pub fn stokes_config(&self) -> StokesConfig {
        StokesConfig {
            viscosity: self.stokes.viscosity,
            t_end: self.stokes.t_end,
            substeps: self.stokes.substeps,
            project_force: self.stokes.project_force,
            with_pressure: self.stokes.with_pressure,
        }
    }
}

pub fn manifest_skeleton(
    grid: GridSection,
    stokes: &StokesConfig,
    picard: &PicardSection,
) -> (ManifestGrid, ManifestStokes, ManifestPicard) {
    (
        ManifestGrid {
            n: grid.n,
            box_length: grid.box_length,
        },
        ManifestStokes {
            viscosity: stokes.viscosity,
            t_end: stokes.t_end,
            substeps: stokes.substeps,
            project_force: stokes.project_force,
            with_pressure: stokes.with_pressure,
        },
        ManifestPicard {
            max_iterations: picard.max_iterations,
            tolerance: picard.tolerance,
            divergence_window: picard.divergence_window,
            snapshot_times: picard.snapshot_times.clone(),
            keep_history: picard.keep_history,
        },
    )
}

pub fn outcome_from_state(state: &PicardState, diag: Option<&spicard::ContractionReport>) -> Outcome {
    let (u1_sup, u1_l2) = state.first_iterate_norms();
    Outcome {
        status: status_name(state.status()).to_owned(),
        status_detail: state.status_detail().map(str::to_owned),
        iterations: state.j(),
        first_iterate_sup: u1_sup,
        first_iterate_l2: u1_l2,
        correction_sup: state.correction_norms().iter().map(|n| n.sup).collect(),
        correction_l2: state.correction_norms().iter().map(|n| n.l2).collect(),
        alpha_max: diag.map(|d| d.alpha_max),
        alpha_fit: diag.map(|d| d.alpha_fit),
        rate_bound_holds: diag.and_then(|d| d.rate_bound.map(|rb| rb.holds)),
    }
}

// ---- report -------------------------------------------------------------

/// Residual and energy check summary for one run, computed from snapshots as
/// stored. The optional blocks are absent when the velocities are non-finite
/// (a diverged run still gets a truthful report) or when there are too few
/// snapshots for the time stencil.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub finite: bool,
    pub pressure_term_included: bool,
    pub residuals: Option<ResidualReport>,
    pub energy: Option<EnergyBound>,
}

/// Pressure at each snapshot from the instantaneous effective force: the base
/// force minus the velocity's own advection term.
pub fn attach_pressures(
    traj: &mut Trajectory,
    force: &dyn ForceSampler,
) -> Result<()> {
    let space = Arc::clone(traj.space());
    let times = traj.times().to_vec();
    let mut pressures = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let base = force.sample_spectral(t, &space)?;
        let v = traj.velocity_spectral(i);
        let adv = advect_spectral(&space, v, v)?;
        let eff = base.sub(&adv);
        pressures.push(pressure_from_force(&space, &eff));
    }
    for (i, p) in pressures.into_iter().enumerate() {
        traj.set_pressure_spectral(i, Some(p));
    }
    Ok(())
}

/// Rebuild the trajectory from the snapshot files named by the manifest and
/// compute its report. Both the solve and verify commands call this, which is
/// what makes their reports bit-identical.
pub fn report_from_disk(run_dir: &Path, manifest: &Manifest) -> Result<RunReport> {
    if manifest.snapshots.is_empty() {
        bail!("manifest lists no snapshots");
    }
    let grid = spicard::Grid::new(manifest.grid.n, manifest.grid.box_length)?;
    let space = Arc::new(SpectralSpace::new(grid));

    let mut times = Vec::with_capacity(manifest.snapshots.len());
    let mut velocity = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let path = run_dir.join(&entry.file);
        let (meta, field) = read_snapshot(&path)?;
        if meta.n as usize != manifest.grid.n
            || meta.box_length != manifest.grid.box_length
            || meta.viscosity != manifest.stokes.viscosity
        {
            bail!(
                "snapshot {} header disagrees with the manifest",
                path.display()
            );
        }
        if meta.time != entry.time {
            bail!(
                "snapshot {} is stamped t = {} but the manifest says t = {}",
                path.display(),
                meta.time,
                entry.time
            );
        }
        times.push(meta.time);
        velocity.push(space.forward(&field)?);
    }

    let pressures = vec![None; times.len()];
    let mut traj = Trajectory::from_parts(
        Arc::clone(&space),
        manifest.stokes.viscosity,
        times,
        velocity,
        pressures,
    )?;

    let force = force_from_manifest(manifest)?;
    let finite = traj.is_finite();
    let want_pressure = manifest.stokes.with_pressure && finite;
    if want_pressure {
        attach_pressures(&mut traj, force.as_ref())?;
    }

    let residuals = if finite && traj.len() >= 3 {
        Some(residual_report(
            &traj,
            force.as_ref(),
            NseOptions::default(),
        )?)
    } else {
        None
    };
    let energy = if finite {
        Some(energy_bound(&traj, force.as_ref())?)
    } else {
        None
    };

    Ok(RunReport {
        finite,
        pressure_term_included: want_pressure,
        residuals,
        energy,
    })
}

pub fn force_from_manifest(manifest: &Manifest) -> Result<Box<dyn ForceSampler>> {
    match &manifest.force {
        Some(f) => {
            let params =
                GaussianForceParams::new(f.amplitude, f.width, manifest.stokes.viscosity)?;
            Ok(Box::new(GaussianForce::new(params, manifest.stokes.t_end)))
        }
        None => Ok(Box::new(ZeroForce)),
    }
}

/// Canonical JSON serialization for artifacts, newline-terminated.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}
