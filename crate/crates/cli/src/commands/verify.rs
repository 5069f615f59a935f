//! The verify command: re-derive the residual report of a finished run from
//! its manifest and snapshot files alone. Because this is the same code path
//! the solve command used for its own report, agreement is byte for byte.

use std::path::Path;

use anyhow::{bail, Context, Result};
use spicard::Grid;

use crate::commands::common::{report_from_disk, to_json_bytes, Manifest, RunGuard};
use crate::config::{RunConfig, Scenario};
use crate::Logger;

pub fn cmd_verify(config: &RunConfig, out_override: Option<&Path>, log: &Logger) -> Result<()> {
    if config.scenario != Scenario::Verify {
        bail!(
            "the verify command runs the verify scenario, not {}",
            config.scenario.name()
        );
    }
    let run_dir = &config.verify()?.run_dir;
    let manifest = Manifest::load(&run_dir.join("manifest.json"))?;

    // cheap sanity before the transforms: the grid must reconstruct
    Grid::new(manifest.grid.n, manifest.grid.box_length)
        .context("manifest grid does not reconstruct")?;

    let report = report_from_disk(run_dir, &manifest)?;
    log.info(format!(
        "recomputed report for {}: finite = {}, pressure term = {}",
        run_dir.display(),
        report.finite,
        report.pressure_term_included
    ));

    // verification.json lands next to the run unless --out or [output]
    // redirects it
    let out_dir = match (out_override, &config.output) {
        (Some(dir), _) => dir.to_owned(),
        (None, Some(section)) => section.dir.clone(),
        (None, None) => run_dir.clone(),
    };
    let mut guard = RunGuard::new();
    guard.make_dir(&out_dir)?;
    guard.write(
        &out_dir.join("verification.json"),
        &to_json_bytes(&report)?,
    )?;
    guard.commit();
    Ok(())
}
