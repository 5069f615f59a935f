//! Property tests for the closed-form reference solutions: the adaptive
//! quadrature oracle against the closed form, special-function identities
//! against independent formulations, and finite-difference gradients.

use proptest::prelude::*;

use spicard::reference::{
    convergence_ratio, force_profile, grad_u11_closed_form, incomplete_gamma_lower, kummer_phi,
    quadrature_oracle_u11, relaxed_first_estimate, u11_closed_form, u11_closed_form_radial,
    u11_phi_form, u2_star_estimate, GaussianForceParams,
};

fn params(f: f64, mu: f64, nu: f64) -> GaussianForceParams {
    GaussianForceParams::new(f, mu, nu).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// The velocity response written as an integral and evaluated by
    /// adaptive quadrature agrees with the closed form everywhere. The
    /// comparison carries a small absolute cushion because the quadrature
    /// tolerance is absolute while the closed form can be arbitrarily small.
    #[test]
    fn quadrature_oracle_matches_closed_form(
        f in 0.05f64..4.0,
        mu in 0.25f64..2.0,
        nu in 0.25f64..2.0,
        t in 0.01f64..2.0,
        x0 in -3.0f64..3.0,
        x1 in -3.0f64..3.0,
        x2 in -3.0f64..3.0,
    ) {
        let p = params(f, mu, nu);
        let x = [x0, x1, x2];
        let closed = u11_closed_form(x, t, &p);
        let oracle = quadrature_oracle_u11(x, t, &p, 1e-12).unwrap();
        let tol = 1e-9 * closed.abs() + 5e-12;
        prop_assert!((closed - oracle).abs() < tol, "closed {closed:.15e} oracle {oracle:.15e}");
    }

    /// Both printed forms of the response coincide.
    #[test]
    fn u11_forms_agree(
        f in 0.05f64..4.0,
        mu in 0.25f64..2.0,
        nu in 0.25f64..2.0,
        t in 0.0f64..2.0,
        x0 in -3.0f64..3.0,
        x1 in -3.0f64..3.0,
        x2 in -3.0f64..3.0,
    ) {
        let p = params(f, mu, nu);
        let x = [x0, x1, x2];
        let a = u11_closed_form(x, t, &p);
        let b = u11_phi_form(x, t, &p);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-13), "{a:.15e} vs {b:.15e}");
    }

    /// Kummer reflection: Phi(1,2;z) = e^z Phi(1,2;-z).
    #[test]
    fn phi_12_satisfies_kummer_reflection(z in -25.0f64..25.0) {
        let lhs = kummer_phi(1, 2, z).unwrap();
        let rhs = z.exp() * kummer_phi(1, 2, -z).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1e-300));
    }

    /// Direct series cross-check of both supported Phi cases on a window
    /// where the series is well conditioned. Written from the Pochhammer
    /// definition, independently of the elementary forms inside.
    #[test]
    fn phi_series_cross_check(z in -3.0f64..3.0) {
        // Phi(1,2;z) = sum z^k / (k+1)!
        let mut term = 1.0f64;
        let mut s12 = 0.0f64;
        for k in 0..60u32 {
            if k > 0 {
                term *= z / k as f64;
            }
            s12 += term / (k + 1) as f64;
        }
        let got12 = kummer_phi(1, 2, z).unwrap();
        prop_assert!((got12 - s12).abs() < 1e-13 * s12.abs().max(1.0));

        // Phi(2,3;z) = sum 2 z^k / ((k+2) k!)
        let mut pow = 1.0f64; // z^k / k!
        let mut s23 = 0.0f64;
        for k in 0..60u32 {
            if k > 0 {
                pow *= z / k as f64;
            }
            s23 += 2.0 * pow / (k + 2) as f64;
        }
        let got23 = kummer_phi(2, 3, z).unwrap();
        prop_assert!((got23 - s23).abs() < 1e-13 * s23.abs().max(1.0));
    }

    /// gamma(a+1, x) = a gamma(a, x) - x^a e^{-x}.
    #[test]
    fn incomplete_gamma_recurrence(a in 0.3f64..6.0, x in 0.0f64..25.0) {
        let lhs = incomplete_gamma_lower(a + 1.0, x).unwrap();
        let rhs = a * incomplete_gamma_lower(a, x).unwrap() - x.powf(a) * (-x).exp();
        prop_assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1e-12), "{lhs:.15e} vs {rhs:.15e}");
    }

    /// gamma(1, x) = 1 - e^{-x} exactly.
    #[test]
    fn incomplete_gamma_at_one(x in 0.0f64..30.0) {
        let got = incomplete_gamma_lower(1.0, x).unwrap();
        let want = -((-x).exp_m1());
        prop_assert!((got - want).abs() <= 1e-13 * want.max(1e-300));
    }

    /// The time profile is a value in (0, 1], increasing toward tau = t and
    /// exactly 1 there.
    #[test]
    fn force_profile_bounds_and_monotonicity(
        f in 0.05f64..4.0,
        mu in 0.25f64..2.0,
        nu in 0.25f64..2.0,
        t in 0.01f64..2.0,
        s1 in 0.0f64..1.0,
        s2 in 0.0f64..1.0,
    ) {
        let p = params(f, mu, nu);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = force_profile(&p, t, lo * t).unwrap();
        let b = force_profile(&p, t, hi * t).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0 + 1e-15);
        prop_assert!(b + 1e-15 >= a);
        let end = force_profile(&p, t, t).unwrap();
        prop_assert!((end - 1.0).abs() < 1e-15);
    }

    /// Gradient closed form against a centered finite difference of the
    /// response itself.
    #[test]
    fn gradient_matches_finite_difference(
        f in 0.1f64..2.0,
        mu in 0.3f64..1.5,
        nu in 0.3f64..1.5,
        t in 0.05f64..1.5,
        x0 in -2.0f64..2.0,
        x1 in -2.0f64..2.0,
        x2 in -2.0f64..2.0,
        axis in 0usize..3,
    ) {
        let p = params(f, mu, nu);
        let x = [x0, x1, x2];
        let g = grad_u11_closed_form(x, t, &p, axis);
        let h = 1e-5;
        let mut xp = x;
        let mut xm = x;
        xp[axis] += h;
        xm[axis] -= h;
        let fd = (u11_closed_form(xp, t, &p) - u11_closed_form(xm, t, &p)) / (2.0 * h);
        let tol = 1e-5 * g.abs().max(f);
        prop_assert!((g - fd).abs() < tol, "axis {axis}: {g:.10e} vs fd {fd:.10e}");
    }

    /// The second-correction magnitude estimate is nonnegative, increasing
    /// in t, and bounded by its t -> infinity limit.
    #[test]
    fn second_correction_estimate_bracket(
        f in 0.05f64..4.0,
        mu in 0.25f64..2.0,
        nu in 0.25f64..2.0,
        t1 in 0.0f64..3.0,
        dt in 0.0f64..3.0,
        r in 0.0f64..5.0,
    ) {
        let p = params(f, mu, nu);
        let x = [r, 0.0, 0.0];
        let early = u2_star_estimate(x, t1, &p);
        let later = u2_star_estimate(x, t1 + dt, &p);
        let cap = f * f / (8.0 * mu.powi(6) * nu.powi(3))
            * (1.0 - std::f64::consts::FRAC_PI_4);
        prop_assert!(early >= 0.0);
        prop_assert!(later + 1e-15 * cap >= early);
        prop_assert!(later <= cap * (1.0 + 1e-12));
    }

    /// The convergence ratio is the literal formula and scales linearly in
    /// the force amplitude.
    #[test]
    fn ratio_is_the_formula(
        f in 0.05f64..4.0,
        mu in 0.25f64..2.0,
        nu in 0.25f64..2.0,
    ) {
        let p = params(f, mu, nu);
        let r = convergence_ratio(&p);
        prop_assert_eq!(r, f / (mu.powi(4) * nu));
        let doubled = convergence_ratio(&params(2.0 * f, mu, nu));
        prop_assert!((doubled - 2.0 * r).abs() < 1e-14 * r.abs());
    }

    /// The relaxed first-iterate envelope dominates the closed-form response
    /// in its validity region mu^2 r^2 >= 1.
    #[test]
    fn relaxed_estimate_dominates_beyond_unit_mode(
        f in 0.05f64..2.0,
        mu in 0.3f64..1.5,
        nu in 0.3f64..1.5,
        t in 0.05f64..1.5,
        w in 1.0f64..30.0,
    ) {
        let p = params(f, mu, nu);
        let r = w.sqrt() / mu; // so mu^2 r^2 = w
        let x = [r, 0.0, 0.0];
        let u = u11_closed_form(x, t, &p);
        let est = relaxed_first_estimate(x, t, &p);
        prop_assert!(u >= 0.0);
        prop_assert!(u <= est * (1.0 + 1e-12), "u {u:.6e} vs envelope {est:.6e}");
    }
}

/// Radial and point forms are the same function of r^2.
#[test]
fn radial_and_point_forms_agree() {
    let p = params(1.0, 1.0, 1.0);
    for &(x, t) in &[([0.5, -1.0, 2.0], 0.7), ([0.0, 0.0, 0.0], 1.3), ([3.0, 0.0, 0.0], 0.1)] {
        let r_sq: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(u11_closed_form(x, t, &p), u11_closed_form_radial(&p, t, r_sq));
    }
}
