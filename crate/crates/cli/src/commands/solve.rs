//! The solve command: run the fixed-point iteration for one configuration and
//! write snapshots, a diagnostics table, a residual report, and the manifest.
//! A diverged run is still a completed run; only infrastructure failures
//! (unreadable config, unwritable output) are command errors.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spicard::{
    iterate_to_fixed_point, ForceSampler, GaussianForce, Grid, SpectralSpace, VectorField,
    ZeroForce,
};

use crate::commands::common::{
    manifest_skeleton, outcome_from_state, to_json_bytes, Artifacts, Flags, Manifest,
    ManifestForce, ManifestInitial, RunGuard, SnapshotEntry, MANIFEST_SCHEMA_VERSION,
};
use crate::config::{InitialKind, RunConfig, Scenario};
use crate::csvout::{Cell, Csv};
use crate::snapshot::write_snapshot;
use crate::Logger;

pub fn cmd_solve(config: &RunConfig, out_override: Option<&Path>, log: &Logger) -> Result<()> {
    let force_required = match config.scenario {
        Scenario::GaussianBenchmark => true,
        Scenario::CustomInitial => false,
        other => bail!(
            "the solve command runs the gaussian_benchmark and custom_initial scenarios, not {}",
            other.name()
        ),
    };

    let grid_section = config.grid()?;
    let stokes = config.stokes()?;
    let picard = config.picard();
    let grid = Grid::new(grid_section.n, grid_section.box_length)?;
    let space = Arc::new(SpectralSpace::new(grid));

    // Initial state per scenario. The benchmark always starts from rest; a
    // custom run draws a divergence-free field from the seed.
    let (u0, initial) = match config.scenario {
        Scenario::GaussianBenchmark => (
            VectorField::zeros(grid),
            ManifestInitial {
                kind: "zero".into(),
                amplitude: 0.0,
                seed: None,
            },
        ),
        Scenario::CustomInitial => {
            let section = config
                .initial
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("custom_initial requires an [initial] section"))?;
            match section.kind {
                InitialKind::Zero => (
                    VectorField::zeros(grid),
                    ManifestInitial {
                        kind: "zero".into(),
                        amplitude: 0.0,
                        seed: None,
                    },
                ),
                InitialKind::RandomSolenoidal => {
                    let seed = config.seed.unwrap_or(0);
                    let u0 = random_solenoidal(&space, seed, section.amplitude)?;
                    (
                        u0,
                        ManifestInitial {
                            kind: "random_solenoidal".into(),
                            amplitude: section.amplitude,
                            seed: Some(seed),
                        },
                    )
                }
            }
        }
        _ => unreachable!("scenario gate above"),
    };

    // Force per scenario: required for the benchmark, optional otherwise.
    let manifest_force = if force_required || config.force.is_some() {
        let params = config.force_params()?;
        let section = config.force.expect("force_params checked presence");
        Some((params, section))
    } else {
        None
    };
    let force: Box<dyn ForceSampler> = match &manifest_force {
        Some((params, _)) => {
            Box::new(GaussianForce::new(*params, stokes.t_end).precompute(&space)?)
        }
        None => Box::new(ZeroForce),
    };

    // Claim the output directory before the long part so an unwritable
    // destination fails fast and leaves nothing behind.
    let out_dir = config.out_dir(out_override)?;
    let mut guard = RunGuard::new();
    guard.make_dir(&out_dir)?;

    // Pressure attachment happens on the re-read snapshots, not here, so the
    // report path is shared with the verify command.
    let mut inner = stokes.clone();
    inner.with_pressure = false;

    log.info(format!(
        "solving {} on {}^3, box {}, t_end {}",
        config.scenario.name(),
        grid_section.n,
        grid_section.box_length,
        stokes.t_end
    ));
    let outcome = iterate_to_fixed_point(&space, &u0, force.as_ref(), picard.clone(), &inner)?;
    let state = &outcome.state;
    log.info(format!(
        "iteration finished: {} after {} iterates",
        super::common::status_name(state.status()),
        state.j()
    ));

    // snapshots
    let traj = state.current();
    let mut entries = Vec::with_capacity(traj.times().len());
    for (i, &t) in traj.times().iter().enumerate() {
        let name = format!("snap_{i:04}.spkd");
        let path = out_dir.join(&name);
        guard.track(&path);
        write_snapshot(&path, &traj.velocity(i), t, stokes.viscosity)?;
        entries.push(SnapshotEntry { file: name, time: t });
    }

    // diagnostics table: norms and consecutive ratios per iterate
    let mut csv = Csv::new(&[
        "l",
        "correction_sup",
        "correction_l2",
        "alpha_sup",
        "alpha_l2",
    ]);
    let (u1_sup, u1_l2) = state.first_iterate_norms();
    csv.row(&[
        Cell::Int(1),
        Cell::Num(u1_sup),
        Cell::Num(u1_l2),
        Cell::Empty,
        Cell::Empty,
    ]);
    let mut prev = (u1_sup, u1_l2);
    for norms in state.correction_norms() {
        let alpha_sup = if prev.0 > 0.0 { norms.sup / prev.0 } else { f64::NAN };
        let alpha_l2 = if prev.1 > 0.0 { norms.l2 / prev.1 } else { f64::NAN };
        csv.row(&[
            Cell::Int(norms.l as u64),
            Cell::Num(norms.sup),
            Cell::Num(norms.l2),
            Cell::Num(alpha_sup),
            Cell::Num(alpha_l2),
        ]);
        prev = (norms.sup, norms.l2);
    }
    guard.write(&out_dir.join("diagnostics.csv"), csv.into_string().as_bytes())?;

    // manifest
    let (m_grid, m_stokes, m_picard) = manifest_skeleton(grid_section, &stokes, &config.picard);
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        scenario: config.scenario.name().to_owned(),
        flags: Flags::current(),
        grid: m_grid,
        stokes: m_stokes,
        picard: m_picard,
        force: manifest_force.as_ref().map(|(_, section)| ManifestForce {
            amplitude: section.amplitude,
            width: section.width,
        }),
        initial,
        outcome: outcome_from_state(state, outcome.diagnostics.as_ref()),
        snapshots: entries,
        artifacts: Artifacts {
            diagnostics: "diagnostics.csv".into(),
            report: "report.json".into(),
        },
    };
    guard.write(&out_dir.join("manifest.json"), &to_json_bytes(&manifest)?)?;

    // report, computed from the files just written
    let report = super::common::report_from_disk(&out_dir, &manifest)
        .context("computing the residual report from the written snapshots")?;
    guard.write(&out_dir.join("report.json"), &to_json_bytes(&report)?)?;

    guard.commit();
    log.info(format!("run artifacts in {}", out_dir.display()));
    Ok(())
}

/// Divergence-free random field: iid Gaussian physical components, projected,
/// scaled to the requested sup amplitude.
fn random_solenoidal(
    space: &Arc<SpectralSpace>,
    seed: u64,
    amplitude: f64,
) -> Result<VectorField> {
    let grid = space.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = VectorField::zeros(grid);
    for k in 0..3 {
        for v in field.component_mut(k).iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let mut hat = space.forward(&field)?;
    space.leray_project_in_place(&mut hat);
    let projected = space.inverse_unchecked(&hat);
    let sup = projected.sup_norm();
    let mut out = VectorField::zeros(grid);
    if sup > 0.0 {
        out.add_scaled(&projected, amplitude / sup);
    }
    Ok(out)
}
