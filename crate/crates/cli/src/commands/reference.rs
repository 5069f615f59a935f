//! The reference command: tabulate the closed-form benchmark response, its
//! gradient, the second-correction estimate, and an adaptive-quadrature check
//! of the closed form, on a grid of times and radii from the config.

use std::path::Path;

use anyhow::{bail, Result};
use spicard::reference::{
    grad_u11_closed_form, quadrature_oracle_u11, u11_closed_form, u2_star_estimate,
};

use crate::commands::common::RunGuard;
use crate::config::{RunConfig, Scenario};
use crate::csvout::{Cell, Csv};
use crate::Logger;

const ORACLE_TOL: f64 = 1e-12;

pub fn cmd_reference(config: &RunConfig, out_override: Option<&Path>, log: &Logger) -> Result<()> {
    if config.scenario != Scenario::GaussianBenchmark {
        bail!(
            "the reference command tabulates the gaussian_benchmark scenario, not {}",
            config.scenario.name()
        );
    }
    let params = config.force_params()?;
    let section = config.reference()?;
    if section.times.is_empty() || section.radii.is_empty() {
        bail!("[reference] needs at least one time and one radius");
    }
    for &t in &section.times {
        if !(t.is_finite() && t >= 0.0) {
            bail!("[reference] times must be finite and nonnegative, got {t}");
        }
    }
    for &r in &section.radii {
        if !(r.is_finite() && r >= 0.0) {
            bail!("[reference] radii must be finite and nonnegative, got {r}");
        }
    }

    let mut csv = Csv::new(&[
        "x0",
        "x1",
        "x2",
        "t",
        "u11",
        "grad_abs_x0",
        "grad_abs_x1",
        "grad_abs_x2",
        "u2_star",
        "oracle",
        "abs_diff",
    ]);

    for &t in &section.times {
        for &r in &section.radii {
            let x = [r, 0.0, 0.0];
            if t == 0.0 {
                // nothing has happened yet; every quantity is exactly zero
                csv.row(&[
                    Cell::Num(x[0]),
                    Cell::Num(x[1]),
                    Cell::Num(x[2]),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                    Cell::Num(0.0),
                ]);
                continue;
            }
            let u11 = u11_closed_form(x, t, &params);
            let grad: Vec<f64> = (0..3)
                .map(|axis| grad_u11_closed_form(x, t, &params, axis).abs())
                .collect();
            let u2 = u2_star_estimate(x, t, &params);
            let oracle = quadrature_oracle_u11(x, t, &params, ORACLE_TOL)?;
            csv.row(&[
                Cell::Num(x[0]),
                Cell::Num(x[1]),
                Cell::Num(x[2]),
                Cell::Num(t),
                Cell::Num(u11),
                Cell::Num(grad[0]),
                Cell::Num(grad[1]),
                Cell::Num(grad[2]),
                Cell::Num(u2),
                Cell::Num(oracle),
                Cell::Num((u11 - oracle).abs()),
            ]);
        }
    }

    let out_dir = config.out_dir(out_override)?;
    let mut guard = RunGuard::new();
    guard.make_dir(&out_dir)?;
    guard.write(&out_dir.join("reference.csv"), csv.into_string().as_bytes())?;
    guard.commit();
    log.info(format!(
        "wrote {} rows to {}",
        section.times.len() * section.radii.len(),
        out_dir.join("reference.csv").display()
    ));
    Ok(())
}
