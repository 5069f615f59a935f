//! A miniature end-to-end parameter sweep through the public API: records
//! come back in plan order with the right classification and summary.

use spicard::{region_report, run_sweep, SweepPlan, SweepStatus};

#[test]
fn small_sweep_classifies_and_summarizes() {
    let plan = SweepPlan {
        force_values: vec![0.0, 0.05, 0.2],
        width_values: vec![1.0],
        viscosity_values: vec![1.0],
        grid_n: 8,
        box_coeff: 8.0,
        t_end: 0.5,
        substeps: 4,
        max_iterations: 10,
        tol_abs: 1e-8,
        workers: 2,
    };
    let records = run_sweep(&plan).unwrap();
    assert_eq!(records.len(), 3);

    // plan order: force outermost
    let forces: Vec<f64> = records.iter().map(|r| r.force_amplitude).collect();
    assert_eq!(forces, vec![0.0, 0.05, 0.2]);

    // the unforced point converges on the first iterate with a zero ratio
    assert_eq!(records[0].status, SweepStatus::Converged);
    assert_eq!(records[0].estimate_ratio, 0.0);
    assert_eq!(records[0].iterations_used, 1);
    assert_eq!(records[0].final_correction_norm, 0.0);

    // deep-inside points converge with a visibly contracting iteration
    for r in &records[1..] {
        assert_eq!(r.status, SweepStatus::Converged, "{:?}", r.reason);
        assert_eq!(r.estimate_ratio, r.force_amplitude); // mu = nu = 1
        assert!(r.max_alpha < 0.95, "alpha {}", r.max_alpha);
        assert!(r.iterations_used >= 2);
        assert!(r.final_correction_norm < plan.tol_abs);
    }

    let report = region_report(&records);
    assert_eq!(report.counts[0], [3, 0, 0]);
    assert_eq!(report.counts[1], [0, 0, 0]);
    assert_eq!(report.inside_converged_fraction, 1.0);
    assert!(report.interleaved_rays.is_empty());
}
