//! Physical and spectral field containers.
//!
//! Physical arrays are indexed [i0, i1, i2] for the (x1, x2, x3) axes;
//! spectral arrays use the same layout with FFT mode ordering per axis.

use ndarray::Array3;
use rustfft::num_complex::Complex64;

use crate::error::SpectralError;
use crate::grid::Grid;

/// Real scalar sample field on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    data: Array3<f64>,
}

/// Three-component real field (velocity or force).
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    comps: [Array3<f64>; 3],
}

/// Complex coefficients of a scalar field.
#[derive(Debug, Clone)]
pub struct SpectralScalarField {
    grid: Grid,
    data: Array3<Complex64>,
}

/// Complex coefficients of a three-component field. Hermitian symmetry is an
/// invariant for spectra of real fields; the public inverse transform checks it.
#[derive(Debug, Clone)]
pub struct SpectralVectorField {
    grid: Grid,
    comps: [Array3<Complex64>; 3],
}

fn dims(grid: Grid) -> (usize, usize, usize) {
    (grid.n(), grid.n(), grid.n())
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: Array3::zeros(dims(grid)),
        }
    }

    /// Sample a function of the centered coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let c = grid.coords();
        let n = grid.n();
        let mut data = Array3::zeros(dims(grid));
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    data[[i0, i1, i2]] = f(c[i0], c[i1], c[i2]);
                }
            }
        }
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn from_array(grid: Grid, data: Array3<f64>) -> Self {
        assert_eq!(data.dim(), dims(grid));
        ScalarField { grid, data }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            comps: [
                Array3::zeros(dims(grid)),
                Array3::zeros(dims(grid)),
                Array3::zeros(dims(grid)),
            ],
        }
    }

    /// Sample a vector function of the centered coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let c = grid.coords();
        let n = grid.n();
        let mut out = VectorField::zeros(grid);
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let v = f(c[i0], c[i1], c[i2]);
                    for (k, val) in v.iter().enumerate() {
                        out.comps[k][[i0, i1, i2]] = *val;
                    }
                }
            }
        }
        out
    }

    pub fn from_components(grid: Grid, comps: [Array3<f64>; 3]) -> Self {
        for c in &comps {
            assert_eq!(c.dim(), dims(grid));
        }
        VectorField { grid, comps }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, k: usize) -> &Array3<f64> {
        &self.comps[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut Array3<f64> {
        &mut self.comps[k]
    }

    pub fn components(&self) -> &[Array3<f64>; 3] {
        &self.comps
    }

    /// Index of the first non-finite value, if any.
    pub fn check_finite(&self) -> Result<(), SpectralError> {
        for (k, c) in self.comps.iter().enumerate() {
            if let Some(idx) = c.iter().position(|v| !v.is_finite()) {
                return Err(SpectralError::NonFinite {
                    component: k,
                    index: idx,
                });
            }
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm sqrt(sum |u|^2 h^3).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn add_scaled(&mut self, other: &VectorField, factor: f64) {
        for k in 0..3 {
            self.comps[k].zip_mut_with(&other.comps[k], |a, b| *a += factor * b);
        }
    }
}

impl SpectralScalarField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralScalarField {
            grid,
            data: Array3::zeros(dims(grid)),
        }
    }

    pub fn from_array(grid: Grid, data: Array3<Complex64>) -> Self {
        assert_eq!(data.dim(), dims(grid));
        SpectralScalarField { grid, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.data
    }
}

impl SpectralVectorField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralVectorField {
            grid,
            comps: [
                Array3::zeros(dims(grid)),
                Array3::zeros(dims(grid)),
                Array3::zeros(dims(grid)),
            ],
        }
    }

    pub fn from_components(grid: Grid, comps: [Array3<Complex64>; 3]) -> Self {
        for c in &comps {
            assert_eq!(c.dim(), dims(grid));
        }
        SpectralVectorField { grid, comps }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, k: usize) -> &Array3<Complex64> {
        &self.comps[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut Array3<Complex64> {
        &mut self.comps[k]
    }

    pub fn components(&self) -> &[Array3<Complex64>; 3] {
        &self.comps
    }

    pub fn max_amplitude(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn add_scaled(&mut self, other: &SpectralVectorField, factor: f64) {
        for k in 0..3 {
            self.comps[k].zip_mut_with(&other.comps[k], |a, b| *a += factor * b);
        }
    }

    pub fn sub(&self, other: &SpectralVectorField) -> SpectralVectorField {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    /// Max deviation from conjugate symmetry, relative to the max amplitude.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.grid.n();
        let amp = self.max_amplitude();
        if amp == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for c in &self.comps {
            for i0 in 0..n {
                let p0 = (n - i0) % n;
                for i1 in 0..n {
                    let p1 = (n - i1) % n;
                    for i2 in 0..n {
                        let p2 = (n - i2) % n;
                        let d = (c[[i0, i1, i2]] - c[[p0, p1, p2]].conj()).norm();
                        worst = worst.max(d);
                    }
                }
            }
        }
        worst / amp
    }
}
