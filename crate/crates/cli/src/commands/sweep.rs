//! The sweep command: run the convergence-region atlas over the force and
//! shape axes from the config, then write the per-point table and the region
//! cross-tabulation.

use std::path::Path;

use anyhow::{bail, Result};
use spicard::{region_report, run_sweep};

use crate::commands::common::{to_json_bytes, RunGuard};
use crate::config::{RunConfig, Scenario};
use crate::csvout::{Cell, Csv};
use crate::Logger;

pub fn cmd_sweep(config: &RunConfig, out_override: Option<&Path>, log: &Logger) -> Result<()> {
    if config.scenario != Scenario::Sweep {
        bail!(
            "the sweep command runs the sweep scenario, not {}",
            config.scenario.name()
        );
    }
    let plan = config.sweep_plan()?;
    log.info(format!(
        "sweeping {} x {} x {} points on {}^3",
        plan.force_values.len(),
        plan.width_values.len(),
        plan.viscosity_values.len(),
        plan.grid_n
    ));

    let records = run_sweep(&plan)?;
    let region = region_report(&records);

    let mut csv = Csv::new(&["F", "mu", "nu", "ratio", "status", "iterations", "max_alpha"]);
    for r in &records {
        let status = r.status.to_string();
        csv.row(&[
            Cell::Num(r.force_amplitude),
            Cell::Num(r.width),
            Cell::Num(r.viscosity),
            Cell::Num(r.estimate_ratio),
            Cell::Text(&status),
            Cell::Int(r.iterations_used as u64),
            Cell::Num(r.max_alpha),
        ]);
    }

    let out_dir = config.out_dir(out_override)?;
    let mut guard = RunGuard::new();
    guard.make_dir(&out_dir)?;
    guard.write(&out_dir.join("atlas.csv"), csv.into_string().as_bytes())?;
    guard.write(&out_dir.join("region.json"), &to_json_bytes(&region)?)?;
    guard.commit();

    log.info(format!(
        "atlas: {} points, inside-estimate convergence fraction {}",
        records.len(),
        region.inside_converged_fraction
    ));
    Ok(())
}
