//! Transform-layer invariants on randomized fields, plus the closed-form
//! Gaussian spectrum check at production resolution.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spicard::verify::divergence_residual_spectral;
use spicard::{Grid, SpectralSpace, SpectralVectorField, VectorField};

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

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_is_identity(seed in any::<u64>(), l in 1.0f64..20.0) {
        let sp = space(8, l);
        let f = random_field(sp.grid(), seed);
        let hat = sp.forward(&f).unwrap();
        let back = sp.inverse(&hat).unwrap();
        let mut diff = back;
        diff.add_scaled(&f, -1.0);
        prop_assert!(diff.sup_norm() < 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn parseval_ties_physical_and_spectral_norms(seed in any::<u64>(), l in 1.0f64..20.0) {
        let sp = space(8, l);
        let f = random_field(sp.grid(), seed);
        let hat = sp.forward(&f).unwrap();
        let a = f.l2_norm();
        let b = sp.l2_norm_spectral(&hat);
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn forward_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let sp = space(8, 5.0);
        let u = random_field(sp.grid(), seed);
        let v = random_field(sp.grid(), seed.wrapping_add(1));
        let mut combo = VectorField::zeros(sp.grid());
        combo.add_scaled(&u, a);
        combo.add_scaled(&v, b);
        let lhs = sp.forward(&combo).unwrap();
        let mut rhs = SpectralVectorField::zeros(sp.grid());
        rhs.add_scaled(&sp.forward(&u).unwrap(), a);
        rhs.add_scaled(&sp.forward(&v).unwrap(), b);
        let scale = lhs.max_amplitude().max(1.0);
        prop_assert!(lhs.sub(&rhs).max_amplitude() < 1e-12 * scale);
    }

    #[test]
    fn projection_is_idempotent_and_kills_computed_divergence(seed in any::<u64>()) {
        let sp = space(8, 4.0);
        let f = random_field(sp.grid(), seed);
        let hat = sp.forward(&f).unwrap();
        let zero_mode_before = hat.component(1)[[0, 0, 0]];
        let once = sp.leray_project(&hat);
        let twice = sp.leray_project(&once);
        let scale = hat.max_amplitude().max(1.0);
        prop_assert!(once.sub(&twice).max_amplitude() < 1e-13 * scale);
        prop_assert!(divergence_residual_spectral(&sp, &once) < 1e-12);
        prop_assert_eq!(once.component(1)[[0, 0, 0]], zero_mode_before);
    }

    #[test]
    fn dealiasing_is_idempotent_and_keeps_low_modes(seed in any::<u64>()) {
        let sp = space(8, 4.0);
        let f = random_field(sp.grid(), seed);
        let hat = sp.forward(&f).unwrap();
        let mut once = hat.clone();
        sp.dealias_in_place(&mut once);
        let mut twice = once.clone();
        sp.dealias_in_place(&mut twice);
        prop_assert_eq!(once.sub(&twice).max_amplitude(), 0.0);
        // |k| <= 2 survives the two-thirds cutoff at n = 8 untouched
        for k in 0..3usize {
            for &j in &[0usize, 1, 2, 6, 7] {
                prop_assert_eq!(once.component(k)[[j, 0, 0]], hat.component(k)[[j, 0, 0]]);
            }
        }
    }

    #[test]
    fn schwartz_norm_is_absolutely_homogeneous(seed in any::<u64>(), c in -4.0f64..4.0) {
        let sp = space(8, 6.0);
        let f = random_field(sp.grid(), seed);
        let mut scaled = VectorField::zeros(sp.grid());
        scaled.add_scaled(&f, c);
        let base = sp.schwartz_norm(&f, 1).unwrap();
        let s = sp.schwartz_norm(&scaled, 1).unwrap();
        prop_assert!((s - c.abs() * base).abs() < 1e-10 * base.max(1.0));
    }
}

/// The centered Gaussian's spectrum has the closed form
/// (pi / mu^2)^{3/2} exp(-|gamma|^2 / (4 mu^2)) once the box holds the tails;
/// every mode carrying at least 1e-4 of the peak must match to 1e-8.
#[test]
fn gaussian_spectrum_matches_closed_form_where_resolved() {
    let mu = 1.0f64;
    let sp = space(64, 10.0);
    let g = VectorField::from_fn(sp.grid(), |x, y, z| {
        [(-mu * mu * (x * x + y * y + z * z)).exp(), 0.0, 0.0]
    });
    let hat = sp.forward(&g).unwrap();
    let peak = (std::f64::consts::PI / (mu * mu)).powf(1.5);
    let gamma_sq = sp.wavenumbers().gamma_sq();
    let n = sp.grid().n();
    let mut worst = 0.0f64;
    for j0 in 0..n {
        for j1 in 0..n {
            for j2 in 0..n {
                let exact = peak * (-gamma_sq[[j0, j1, j2]] / (4.0 * mu * mu)).exp();
                if exact < 1e-4 * peak {
                    continue;
                }
                let got = hat.component(0)[[j0, j1, j2]];
                let err = (got.re - exact).abs().max(got.im.abs()) / exact;
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-8, "worst relative error {worst:.3e}");
}

/// Derivatives commute with the transform: the spectral derivative of a
/// smooth band-limited field equals the analytic one.
#[test]
fn spectral_derivative_of_band_limited_product_is_exact() {
    use spicard::SpectralScalarField;
    let l = 2.0 * std::f64::consts::PI;
    let sp = space(16, l);
    let f = VectorField::from_fn(sp.grid(), |x, y, _| [x.sin() * y.cos(), 0.0, 0.0]);
    let hat = sp.forward(&f).unwrap();
    let d = SpectralScalarField::from_array(sp.grid(), sp.derivative(hat.component(0), 0));
    let got = sp.inverse_scalar(&d).unwrap();
    let want = spicard::ScalarField::from_fn(sp.grid(), |x, y, _| x.cos() * y.cos());
    let worst = got
        .data()
        .iter()
        .zip(want.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-12, "worst {worst:.3e}");
}
