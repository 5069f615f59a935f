//! Forced-diffusion solver checks: the two closed-form benchmarks at
//! production resolution, then structural properties (linearity, restart,
//! exact zero-mode quadrature, solenoidal output, pure decay) on small grids.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spicard::reference::u11_closed_form;
use spicard::stokes::{
    duhamel_integrate, duhamel_integrate_streamed, heat_propagate, quadrature_nodes, ForceRecord,
    PhysicalForce,
};
use spicard::{
    GaussianForce, GaussianForceParams, Grid, SpectralSpace, SpectralVectorField, StokesConfig,
    StokesError, Trajectory, VectorField, ZeroForce,
};

fn space(n: usize, l: f64) -> Arc<SpectralSpace> {
    Arc::new(SpectralSpace::new(Grid::new(n, l).unwrap()))
}

fn random_field(grid: Grid, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = VectorField::zeros(grid);
    for k in 0..3 {
        f.component_mut(k)
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    f
}

/// Random solenoidal initial state so the solver does not reproject it.
fn random_solenoidal(sp: &SpectralSpace, seed: u64) -> VectorField {
    let raw = sp.forward(&random_field(sp.grid(), seed)).unwrap();
    let clean = sp.leray_project(&raw);
    sp.inverse_unchecked(&clean)
}

fn random_force_record(sp: &SpectralSpace, times: &[f64], seed: u64) -> ForceRecord {
    let samples: Vec<SpectralVectorField> = times
        .iter()
        .enumerate()
        .map(|(i, _)| {
            sp.forward(&random_field(sp.grid(), seed.wrapping_add(i as u64)))
                .unwrap()
        })
        .collect();
    ForceRecord::new(sp.grid(), times.to_vec(), samples).unwrap()
}

fn max_relative_error_inside(
    sp: &SpectralSpace,
    velocity: &VectorField,
    t: f64,
    p: &GaussianForceParams,
    r_max: f64,
) -> f64 {
    let coords = sp.grid().coords();
    let n = sp.grid().n();
    let mut worst = 0.0f64;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let x = [coords[i0], coords[i1], coords[i2]];
                let r_sq = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                if r_sq >= r_max * r_max {
                    continue;
                }
                let closed = u11_closed_form(x, t, p);
                let got = velocity.component(0)[[i0, i1, i2]];
                worst = worst.max((got - closed).abs() / closed.abs());
            }
        }
    }
    worst
}

/// Streaming the benchmark force through the memoryless integrator
/// reproduces the closed-form response. 1024 segments on a 64^3 box of side
/// 12 put every interior point (|x| < 3) within 1e-6 relative.
#[test]
fn streamed_integral_matches_closed_form_response() {
    let p = GaussianForceParams::new(1.0, 1.0, 1.0).unwrap();
    let sp = space(64, 12.0);
    let force = GaussianForce::new(p, 1.0).precompute(&sp).unwrap();
    let times = quadrature_nodes(1.0, 1024);
    let samples = times
        .iter()
        .map(|&tau| force.sample_spectral(tau, &sp).map(|f| (tau, f)));
    let hat = duhamel_integrate_streamed(&sp, samples, 1.0, 1.0).unwrap();
    let u = sp.inverse_unchecked(&hat);
    let worst = max_relative_error_inside(&sp, &u, 1.0, &p, 3.0);
    assert!(worst < 1e-6, "max relative error {worst:.3e}");
}

/// The full solver from rest, with the force left unprojected, lands on the
/// same closed form. Box of side 10, snapshots at both ends.
#[test]
fn forced_march_from_rest_matches_closed_form() {
    let p = GaussianForceParams::new(1.0, 1.0, 1.0).unwrap();
    let sp = space(64, 10.0);
    let force = GaussianForce::new(p, 1.0).precompute(&sp).unwrap();
    let mut config = StokesConfig::new(1.0, 1.0, 1024);
    config.project_force = false;
    config.with_pressure = false;
    let u0 = VectorField::zeros(sp.grid());
    let traj = spicard::solve_stokes(&sp, &u0, &config, &force, &[0.0, 1.0]).unwrap();
    assert_eq!(traj.times(), &[0.0, 1.0]);
    assert_eq!(traj.velocity(0).sup_norm(), 0.0);
    let worst = max_relative_error_inside(&sp, &traj.velocity(1), 1.0, &p, 2.5);
    assert!(worst < 1e-5, "max relative error {worst:.3e}");
}

use spicard::ForceSampler;

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    /// The solve is jointly linear in initial state and force.
    #[test]
    fn solve_is_linear_in_state_and_force(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let sp = space(8, 5.0);
        let mut config = StokesConfig::new(0.4, 0.5, 6);
        config.with_pressure = false;
        let times = quadrature_nodes(config.t_end, config.substeps);
        let snaps = [0.0, 0.25, 0.5];

        let u1 = random_solenoidal(&sp, seed);
        let u2 = random_solenoidal(&sp, seed.wrapping_add(99));
        let f1 = random_force_record(&sp, &times, seed.wrapping_add(1000));
        let f2 = random_force_record(&sp, &times, seed.wrapping_add(2000));

        let mut u_combo = VectorField::zeros(sp.grid());
        u_combo.add_scaled(&u1, a);
        u_combo.add_scaled(&u2, b);
        let f_combo_samples: Vec<SpectralVectorField> = (0..times.len())
            .map(|i| {
                let mut s = SpectralVectorField::zeros(sp.grid());
                s.add_scaled(f1.sample(i), a);
                s.add_scaled(f2.sample(i), b);
                s
            })
            .collect();
        let f_combo = ForceRecord::new(sp.grid(), times.clone(), f_combo_samples).unwrap();

        let t1 = spicard::solve_stokes(&sp, &u1, &config, &f1, &snaps).unwrap();
        let t2 = spicard::solve_stokes(&sp, &u2, &config, &f2, &snaps).unwrap();
        let tc = spicard::solve_stokes(&sp, &u_combo, &config, &f_combo, &snaps).unwrap();

        let mut expect = t1.zeros_like();
        expect.add_scaled(&t1, a).unwrap();
        expect.add_scaled(&t2, b).unwrap();
        expect.add_scaled(&tc, -1.0).unwrap();
        let scale = tc.sup_norm().max(1.0);
        prop_assert!(expect.sup_norm() < 1e-12 * scale, "defect {:.3e}", expect.sup_norm());
    }

    /// Stopping at an interior node and restarting from the stored snapshot
    /// continues the same trajectory.
    #[test]
    fn restart_from_snapshot_continues_the_march(seed in any::<u64>()) {
        let sp = space(8, 7.0);
        let mut config = StokesConfig::new(0.3, 1.0, 8);
        config.with_pressure = false;
        let times = quadrature_nodes(config.t_end, config.substeps);
        let force = random_force_record(&sp, &times, seed);
        let u0 = random_solenoidal(&sp, seed.wrapping_add(7));

        let whole = spicard::solve_stokes(&sp, &u0, &config, &force, &[0.0, 0.5, 1.0]).unwrap();

        // second half as its own problem: shift the force record to start at 0
        let cut = times.iter().position(|&t| t == 0.5).unwrap();
        let tail_times: Vec<f64> = times[cut..].iter().map(|t| t - 0.5).collect();
        let tail_samples: Vec<SpectralVectorField> =
            (cut..times.len()).map(|i| force.sample(i).clone()).collect();
        let tail = ForceRecord::new(sp.grid(), tail_times, tail_samples).unwrap();
        let mut half_config = StokesConfig::new(0.3, 0.5, 4);
        half_config.with_pressure = false;
        let restart = spicard::solve_stokes(
            &sp,
            &whole.velocity(1),
            &half_config,
            &tail,
            &[0.0, 0.5],
        )
        .unwrap();

        let mut diff = restart.velocity_spectral(1).clone();
        diff.add_scaled(whole.velocity_spectral(2), -1.0);
        let scale = whole.sup_norm().max(1.0);
        prop_assert!(diff.max_amplitude() < 1e-12 * scale, "defect {:.3e}", diff.max_amplitude());
    }

    /// Trajectories driven by a projected force stay divergence free.
    #[test]
    fn projected_force_keeps_snapshots_solenoidal(seed in any::<u64>()) {
        let sp = space(8, 5.0);
        let config = StokesConfig::new(0.5, 0.6, 5);
        let times = quadrature_nodes(config.t_end, config.substeps);
        let force = random_force_record(&sp, &times, seed);
        let u0 = random_solenoidal(&sp, seed.wrapping_add(3));
        let traj = spicard::solve_stokes(&sp, &u0, &config, &force, &[0.0, 0.36, 0.6]).unwrap();
        prop_assert!(traj.max_divergence_residual() < 1e-13);
    }

    /// With no forcing the march is exactly the heat semigroup.
    #[test]
    fn unforced_march_is_heat_decay(seed in any::<u64>(), t in 0.05f64..2.0) {
        let sp = space(8, 5.0);
        let mut config = StokesConfig::new(0.7, t, 8);
        config.with_pressure = false;
        let u0 = random_solenoidal(&sp, seed);
        let traj = spicard::solve_stokes(&sp, &u0, &config, &ZeroForce, &[0.0, t]).unwrap();
        let direct = heat_propagate(&sp, traj.velocity_spectral(0), 0.7, t).unwrap();
        let mut diff = traj.velocity_spectral(1).clone();
        diff.add_scaled(&direct, -1.0);
        prop_assert!(diff.max_amplitude() < 1e-12 * direct.max_amplitude().max(1e-6));
    }

    /// A spatially constant force rides the zero mode, where the update is an
    /// exact trapezoid: a profile linear in tau integrates exactly.
    #[test]
    fn zero_mode_integrates_linear_profiles_exactly(
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
        slope in -1.5f64..1.5,
    ) {
        let sp = space(8, 5.0);
        let t = 0.75;
        let mut config = StokesConfig::new(0.4, t, 3);
        config.with_pressure = false;
        let force = PhysicalForce::new(move |tau: f64, grid: Grid| {
            let s = 1.0 + slope * tau;
            VectorField::from_fn(grid, |_, _, _| [c0 * s, c1 * s, c2 * s])
        });
        let u0 = VectorField::zeros(sp.grid());
        let traj = spicard::solve_stokes(&sp, &u0, &config, &force, &[0.0, t]).unwrap();
        // int_0^t c (1 + slope tau) d tau = c (t + slope t^2 / 2)
        let integral = t + slope * t * t / 2.0;
        let u = traj.velocity(1);
        for (k, c) in [c0, c1, c2].into_iter().enumerate() {
            let want = c * integral;
            let got = u.component(k)[[2, 5, 1]];
            prop_assert!((got - want).abs() < 1e-13 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    /// Samples reaching past t are clipped: with a force linear in tau the
    /// interpolated cut is exact, so integrating to an off-node time agrees
    /// with a node-aligned reference march.
    #[test]
    fn integration_clips_trailing_samples(seed in any::<u64>()) {
        let sp = space(8, 5.0);
        let spectrum = sp.forward(&random_field(sp.grid(), seed)).unwrap();
        let profile = |tau: f64| 0.3 + 0.8 * tau;
        let sample_at = |tau: f64| {
            let mut s = SpectralVectorField::zeros(sp.grid());
            s.add_scaled(&spectrum, profile(tau));
            s
        };
        let coarse: Vec<(f64, SpectralVectorField)> =
            [0.0, 0.5, 1.0].into_iter().map(|tau| (tau, sample_at(tau))).collect();
        let aligned: Vec<(f64, SpectralVectorField)> =
            [0.0, 0.5, 0.75].into_iter().map(|tau| (tau, sample_at(tau))).collect();
        let clipped = duhamel_integrate(&sp, &coarse, 0.5, 0.75).unwrap();
        let reference = duhamel_integrate(&sp, &aligned, 0.5, 0.75).unwrap();
        let mut diff = clipped;
        diff.add_scaled(&reference, -1.0);
        prop_assert!(diff.max_amplitude() < 1e-13 * reference.max_amplitude().max(1e-6));
    }
}

/// Missing coverage is an error, not a silent extrapolation.
#[test]
fn integrator_rejects_bad_sample_coverage() {
    let sp = space(8, 5.0);
    let zero = SpectralVectorField::zeros(sp.grid());
    let short = vec![(0.0, zero.clone()), (0.4, zero.clone())];
    let err = duhamel_integrate(&sp, &short, 1.0, 1.0).unwrap_err();
    assert!(matches!(err, StokesError::BadSampleCoverage { .. }), "{err}");

    let late_start = vec![(0.1, zero.clone()), (1.0, zero.clone())];
    let err = duhamel_integrate(&sp, &late_start, 1.0, 1.0).unwrap_err();
    assert!(matches!(err, StokesError::BadSampleCoverage { .. }), "{err}");

    let err = duhamel_integrate(&sp, &[], 1.0, 1.0).unwrap_err();
    assert!(matches!(err, StokesError::BadSampleCoverage { .. }), "{err}");
}

/// Snapshot requests must start at zero, increase, and stay inside the span.
#[test]
fn solver_rejects_bad_snapshot_times() {
    let sp = space(8, 5.0);
    let u0 = VectorField::zeros(sp.grid());
    let config = StokesConfig::new(1.0, 1.0, 4);
    for bad in [
        vec![0.5, 1.0],
        vec![0.0, 0.6, 0.4],
        vec![0.0, 1.5],
        vec![],
    ] {
        let err = spicard::solve_stokes(&sp, &u0, &config, &ZeroForce, &bad).unwrap_err();
        assert!(matches!(err, StokesError::BadSnapshotTimes), "{bad:?}: {err}");
    }
}

/// Trajectory combination drops pressures and checks compatibility.
#[test]
fn trajectory_add_scaled_requires_matching_geometry() {
    let sp = space(8, 5.0);
    let other = space(8, 6.0);
    let config = StokesConfig::new(1.0, 0.5, 4);
    let u0 = VectorField::zeros(sp.grid());
    let t1 = spicard::solve_stokes(&sp, &u0, &config, &ZeroForce, &[0.0, 0.5]).unwrap();
    let t2 = spicard::solve_stokes(&other, &VectorField::zeros(other.grid()), &config, &ZeroForce, &[0.0, 0.5]).unwrap();
    let mut acc = t1.clone();
    let err = acc.add_scaled(&t2, 1.0).unwrap_err();
    assert!(matches!(err, StokesError::TrajectoryMismatch), "{err}");
}

/// Restart helper used above relies on node times being exact; pin that the
/// uniform generator hits the midpoint bitwise for an even substep count.
#[test]
fn quadrature_nodes_hit_dyadic_interior_points() {
    let nodes = quadrature_nodes(1.0, 8);
    assert_eq!(nodes.len(), 9);
    assert_eq!(nodes[0], 0.0);
    assert_eq!(nodes[4], 0.5);
    assert_eq!(nodes[8], 1.0);
}

/// Reconstructed trajectories refuse interior times that are off the grid
/// of stored snapshots.
#[test]
fn trajectory_from_parts_validates_times() {
    let sp = space(8, 5.0);
    let zero = SpectralVectorField::zeros(sp.grid());
    let err = Trajectory::from_parts(
        Arc::clone(&sp),
        1.0,
        vec![0.1, 0.5],
        vec![zero.clone(), zero.clone()],
        vec![None, None],
    )
    .unwrap_err();
    assert!(matches!(err, StokesError::BadSnapshotTimes), "{err}");
}
