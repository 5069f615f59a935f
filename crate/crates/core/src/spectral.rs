//! Spectral operator toolbox bound to one grid: transforms with validation,
//! derivatives, projection, dealiasing, norms.

use ndarray::{Array3, Zip};
use rustfft::num_complex::Complex64;

use crate::error::SpectralError;
use crate::fft::TransformEngine;
use crate::field::{
    ScalarField, SpectralScalarField, SpectralVectorField, VectorField,
};
use crate::grid::{Grid, Wavenumbers};

/// Relative tolerance for the conjugate-symmetry check on checked inverses.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance for leftover imaginary parts on checked inverses.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;
/// Highest rapid-decay norm order; each extra order costs a full set of
/// derivative transforms and orders above 2 are never needed here.
pub const MAX_NORM_ORDER: usize = 2;

/// Transforms plus the wavenumber tables for one grid. Shared by reference
/// between solver stages, usually as `Arc<SpectralSpace>`.
#[derive(Debug)]
pub struct SpectralSpace {
    grid: Grid,
    wavenumbers: Wavenumbers,
    engine: TransformEngine,
}

impl SpectralSpace {
    pub fn new(grid: Grid) -> Self {
        SpectralSpace {
            grid,
            wavenumbers: Wavenumbers::new(grid),
            engine: TransformEngine::new(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn wavenumbers(&self) -> &Wavenumbers {
        &self.wavenumbers
    }

    fn check_grid(&self, other: Grid) -> Result<(), SpectralError> {
        if other == self.grid {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }

    // ---- transforms -----------------------------------------------------

    pub fn forward_scalar(
        &self,
        field: &ScalarField,
    ) -> Result<SpectralScalarField, SpectralError> {
        self.check_grid(field.grid())?;
        if let Some(idx) = field.data().iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite {
                component: 0,
                index: idx,
            });
        }
        Ok(SpectralScalarField::from_array(
            self.grid,
            self.engine.forward_array(field.data()),
        ))
    }

    pub fn forward(
        &self,
        field: &VectorField,
    ) -> Result<SpectralVectorField, SpectralError> {
        self.check_grid(field.grid())?;
        field.check_finite()?;
        // an identically zero component transforms to zero; skip its FFT
        let one = |k: usize| {
            let c = field.component(k);
            if c.iter().all(|&v| v == 0.0) {
                Array3::zeros(c.dim())
            } else {
                self.engine.forward_array(c)
            }
        };
        let comps = [one(0), one(1), one(2)];
        Ok(SpectralVectorField::from_components(self.grid, comps))
    }

    /// Checked inverse: rejects spectra that are not within tolerance of a
    /// real field (conjugate symmetry first, leftover imaginary part second).
    pub fn inverse(
        &self,
        modes: &SpectralVectorField,
    ) -> Result<VectorField, SpectralError> {
        self.check_grid(modes.grid())?;
        let deviation = modes.symmetry_deviation();
        if deviation > SYMMETRY_TOL {
            return Err(SpectralError::SymmetryViolation {
                deviation,
                tolerance: SYMMETRY_TOL,
            });
        }
        let (field, residue) = self.inverse_with_residue(modes);
        let scale = field.sup_norm().max(f64::MIN_POSITIVE);
        if residue / scale > IMAG_RESIDUE_TOL {
            return Err(SpectralError::ImaginaryResidue {
                residue: residue / scale,
                tolerance: IMAG_RESIDUE_TOL,
            });
        }
        Ok(field)
    }

    pub fn inverse_scalar(
        &self,
        modes: &SpectralScalarField,
    ) -> Result<ScalarField, SpectralError> {
        self.check_grid(modes.grid())?;
        let (data, residue) = self.engine.inverse_array(modes.data());
        let field = ScalarField::from_array(self.grid, data);
        let scale = field.sup_norm().max(f64::MIN_POSITIVE);
        if residue / scale > IMAG_RESIDUE_TOL {
            return Err(SpectralError::ImaginaryResidue {
                residue: residue / scale,
                tolerance: IMAG_RESIDUE_TOL,
            });
        }
        Ok(field)
    }

    /// Hot-path inverse: takes the real part without symmetry or residue
    /// checks. For spectra produced inside the solver, where symmetry holds
    /// by construction.
    pub fn inverse_unchecked(&self, modes: &SpectralVectorField) -> VectorField {
        self.inverse_with_residue(modes).0
    }

    pub fn inverse_scalar_unchecked(&self, modes: &SpectralScalarField) -> ScalarField {
        let (data, _) = self.engine.inverse_array(modes.data());
        ScalarField::from_array(self.grid, data)
    }

    fn inverse_with_residue(&self, modes: &SpectralVectorField) -> (VectorField, f64) {
        let mut residue = 0.0f64;
        let mut out = Vec::with_capacity(3);
        for k in 0..3 {
            let (data, r) = self.engine.inverse_array(modes.component(k));
            residue = residue.max(r);
            out.push(data);
        }
        let mut it = out.into_iter();
        let comps = [
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        ];
        (VectorField::from_components(self.grid, comps), residue)
    }

    // ---- derivatives -----------------------------------------------------

    /// Multiply one component's modes by -i gamma_axis. The unmatched
    /// half-spectrum plane k_axis = -n/2 is zeroed so derivatives of real
    /// fields stay real.
    pub fn derivative(&self, modes: &Array3<Complex64>, axis: usize) -> Array3<Complex64> {
        let gamma = self.wavenumbers.gamma_diff();
        let mut out = modes.clone();
        Zip::indexed(&mut out).for_each(|(j0, j1, j2), v| {
            let j = [j0, j1, j2][axis];
            *v *= Complex64::new(0.0, -gamma[j]);
        });
        out
    }

    pub fn spectral_gradient(&self, modes: &SpectralScalarField) -> SpectralVectorField {
        let comps = [
            self.derivative(modes.data(), 0),
            self.derivative(modes.data(), 1),
            self.derivative(modes.data(), 2),
        ];
        SpectralVectorField::from_components(self.grid, comps)
    }

    pub fn spectral_divergence(&self, modes: &SpectralVectorField) -> SpectralScalarField {
        let mut acc = self.derivative(modes.component(0), 0);
        let d1 = self.derivative(modes.component(1), 1);
        let d2 = self.derivative(modes.component(2), 2);
        Zip::from(&mut acc).and(&d1).and(&d2).for_each(|a, b, c| *a += b + c);
        SpectralScalarField::from_array(self.grid, acc)
    }

    /// Laplacian: multiply by -|gamma|^2. No unmatched-plane issue since the
    /// symbol is real and even.
    pub fn laplacian(&self, modes: &Array3<Complex64>) -> Array3<Complex64> {
        let mut out = modes.clone();
        Zip::from(&mut out)
            .and(self.wavenumbers.gamma_sq())
            .for_each(|v, &g2| *v *= -g2);
        out
    }

    // ---- projection -------------------------------------------------------

    /// Remove the gradient part mode by mode: subtract gamma (gamma . U) /
    /// |gamma|^2 with the differentiation symbol, so the projected field has
    /// exactly zero computed divergence. The zero mode (and the unmatched
    /// planes' in-plane part) has no gradient part and passes through.
    pub fn leray_project_in_place(&self, modes: &mut SpectralVectorField) {
        let gamma = self.wavenumbers.gamma_diff().to_vec();
        let n = self.grid.n();
        for j0 in 0..n {
            for j1 in 0..n {
                for j2 in 0..n {
                    let g = [gamma[j0], gamma[j1], gamma[j2]];
                    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                    if g2 == 0.0 {
                        continue;
                    }
                    let dot = modes.component(0)[[j0, j1, j2]] * g[0]
                        + modes.component(1)[[j0, j1, j2]] * g[1]
                        + modes.component(2)[[j0, j1, j2]] * g[2];
                    let factor = dot / g2;
                    for (s, &gs) in g.iter().enumerate() {
                        modes.component_mut(s)[[j0, j1, j2]] -= factor * gs;
                    }
                }
            }
        }
    }

    pub fn leray_project(&self, modes: &SpectralVectorField) -> SpectralVectorField {
        let mut out = modes.clone();
        self.leray_project_in_place(&mut out);
        out
    }

    // ---- dealiasing -------------------------------------------------------

    /// Zero every mode with 3 |k_s| > n on any axis (the sharp two-thirds
    /// cutoff, applied per axis).
    pub fn dealias_in_place(&self, modes: &mut SpectralVectorField) {
        let keep = self.dealias_keep_table();
        for s in 0..3 {
            Zip::indexed(modes.component_mut(s)).for_each(|(j0, j1, j2), v| {
                if !(keep[j0] && keep[j1] && keep[j2]) {
                    *v = Complex64::default();
                }
            });
        }
    }

    fn dealias_keep_table(&self) -> Vec<bool> {
        let n = self.grid.n() as i64;
        self.wavenumbers
            .k_signed()
            .iter()
            .map(|&k| 3 * k.abs() <= n)
            .collect()
    }

    // ---- norms ------------------------------------------------------------

    /// Discrete L2 norm computed in coefficient space; equals the sample-space
    /// norm by the transform's Parseval identity.
    pub fn l2_norm_spectral(&self, modes: &SpectralVectorField) -> f64 {
        let vol = self.grid.box_length().powi(3);
        let s: f64 = modes
            .components()
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum();
        (s / vol).sqrt()
    }

    /// Rapid-decay seminorm of order p: per component, the largest value of
    /// sup_x |x^a D^b phi| over all monomial and derivative multi-indices
    /// with |a| <= p, |b| <= p, summed over the three components.
    pub fn schwartz_norm(
        &self,
        field: &VectorField,
        p: usize,
    ) -> Result<f64, SpectralError> {
        self.check_grid(field.grid())?;
        if p > MAX_NORM_ORDER {
            return Err(SpectralError::NormOrderTooHigh {
                requested: p,
                max: MAX_NORM_ORDER,
            });
        }
        field.check_finite()?;
        let combos = multi_indices(p);
        let coords = self.grid.coords();
        let mut total = 0.0f64;
        for comp in 0..3 {
            let modes = SpectralScalarField::from_array(
                self.grid,
                self.engine.forward_array(field.component(comp)),
            );
            let mut comp_max = 0.0f64;
            for deriv in &combos {
                let d = self.multi_derivative(modes.data(), *deriv);
                let (phys, _) = self.engine.inverse_array(&d);
                for mono in &combos {
                    let mut sup = 0.0f64;
                    Zip::indexed(&phys).for_each(|(j0, j1, j2), v| {
                        let w = coords[j0].powi(mono[0] as i32)
                            * coords[j1].powi(mono[1] as i32)
                            * coords[j2].powi(mono[2] as i32)
                            * v;
                        sup = sup.max(w.abs());
                    });
                    comp_max = comp_max.max(sup);
                }
            }
            total += comp_max;
        }
        Ok(total)
    }

    fn multi_derivative(
        &self,
        modes: &Array3<Complex64>,
        orders: [usize; 3],
    ) -> Array3<Complex64> {
        let gamma = self.wavenumbers.gamma();
        let wn = &self.wavenumbers;
        let mut out = modes.clone();
        Zip::indexed(&mut out).for_each(|(j0, j1, j2), v| {
            let idx = [j0, j1, j2];
            for axis in 0..3 {
                for _ in 0..orders[axis] {
                    if wn.is_nyquist(idx[axis]) {
                        *v = Complex64::default();
                    } else {
                        *v *= Complex64::new(0.0, -gamma[idx[axis]]);
                    }
                }
            }
        });
        out
    }
}

/// All multi-indices (a0, a1, a2) with a0 + a1 + a2 <= p.
fn multi_indices(p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=p {
        for a0 in 0..=total {
            for a1 in 0..=(total - a0) {
                out.push([a0, a1, total - a0 - a1]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, l: f64) -> SpectralSpace {
        SpectralSpace::new(Grid::new(n, l).unwrap())
    }

    #[test]
    fn derivative_matches_analytic_sine() {
        let sp = space(16, 4.0);
        let g = 2.0 * std::f64::consts::PI / 4.0;
        let field = ScalarField::from_fn(sp.grid(), |x0, _, _| (g * x0).sin());
        let modes = sp.forward_scalar(&field).unwrap();
        let grad = sp.spectral_gradient(&modes);
        let phys = sp
            .inverse(&grad)
            .expect("gradient of a real field is real");
        let c = sp.grid().coords();
        for (j0, &x0) in c.iter().enumerate() {
            let want = g * (g * x0).cos();
            let got = phys.component(0)[[j0, 3, 5]];
            assert!((got - want).abs() < 1e-12 * g, "{} vs {}", got, want);
        }
        assert!(phys.component(1).iter().all(|v| v.abs() < 1e-12));
        assert!(phys.component(2).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn projection_is_idempotent_and_kills_divergence() {
        let sp = space(8, 3.0);
        let field = VectorField::from_fn(sp.grid(), |x, y, z| {
            let g = 2.0 * std::f64::consts::PI / 3.0;
            [
                (g * x).sin() * (g * y).cos(),
                (g * y).sin() * (2.0 * g * z).cos(),
                (g * z).cos() + 0.3 * (g * x).sin(),
            ]
        });
        let modes = sp.forward(&field).unwrap();
        let once = sp.leray_project(&modes);
        let twice = sp.leray_project(&once);
        let div = sp.spectral_divergence(&once);
        let max_div = div.data().iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let scale = modes.max_amplitude();
        assert!(max_div / scale < 1e-13, "divergence {}", max_div / scale);
        let drift = once.sub(&twice).max_amplitude();
        assert!(drift / scale < 1e-14, "not idempotent: {}", drift / scale);
    }

    #[test]
    fn projection_keeps_zero_mode() {
        let sp = space(8, 3.0);
        let mut modes = SpectralVectorField::zeros(sp.grid());
        modes.component_mut(0)[[0, 0, 0]] = Complex64::new(2.5, 0.0);
        modes.component_mut(2)[[0, 0, 0]] = Complex64::new(-1.0, 0.0);
        let projected = sp.leray_project(&modes);
        assert_eq!(projected.component(0)[[0, 0, 0]], Complex64::new(2.5, 0.0));
        assert_eq!(projected.component(2)[[0, 0, 0]], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn dealias_zeroes_exactly_the_high_third() {
        let sp = space(16, 1.0);
        let mut modes = SpectralVectorField::zeros(sp.grid());
        for c in 0..3 {
            modes.component_mut(c).fill(Complex64::new(1.0, 0.0));
        }
        sp.dealias_in_place(&mut modes);
        let k = sp.wavenumbers().k_signed().to_vec();
        let n = sp.grid().n() as i64;
        for j0 in 0..16 {
            for j1 in 0..16 {
                for j2 in 0..16 {
                    let keep =
                        3 * k[j0].abs() <= n && 3 * k[j1].abs() <= n && 3 * k[j2].abs() <= n;
                    let v = modes.component(0)[[j0, j1, j2]];
                    assert_eq!(v.re != 0.0, keep, "at ({},{},{})", j0, j1, j2);
                }
            }
        }
    }

    #[test]
    fn parseval_ties_both_norms() {
        let sp = space(16, 6.0);
        let field = VectorField::from_fn(sp.grid(), |x, y, z| {
            [
                (-0.5 * (x * x + y * y + z * z)).exp(),
                0.2 * x * (-0.3 * (x * x + z * z)).exp(),
                (0.7 * y).sin() * (-0.2 * y * y).exp(),
            ]
        });
        let modes = sp.forward(&field).unwrap();
        let a = field.l2_norm();
        let b = sp.l2_norm_spectral(&modes);
        assert!((a - b).abs() < 1e-12 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn norm_order_is_capped() {
        let sp = space(8, 2.0);
        let field = VectorField::zeros(sp.grid());
        assert!(matches!(
            sp.schwartz_norm(&field, 3),
            Err(SpectralError::NormOrderTooHigh { requested: 3, max: 2 })
        ));
        assert_eq!(sp.schwartz_norm(&field, 2).unwrap(), 0.0);
    }

    #[test]
    fn schwartz_norm_of_plain_gaussian_is_its_peak_at_p0() {
        let sp = space(32, 12.0);
        let field = VectorField::from_fn(sp.grid(), |x, y, z| {
            [(-(x * x + y * y + z * z)).exp(), 0.0, 0.0]
        });
        let norm = sp.schwartz_norm(&field, 0).unwrap();
        assert!((norm - 1.0).abs() < 1e-10, "norm {}", norm);
    }
}
