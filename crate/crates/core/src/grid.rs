//! Periodic-box discretization and wavenumber bookkeeping.
//!
//! The box is centered: physical coordinates run over [-L/2, L/2) with x = 0
//! on the grid. Wavenumbers follow the standard FFT layout: storage index j
//! maps to the signed integer k = j for j < n/2 and k = j - n otherwise, with
//! angular frequency gamma = 2*pi*k/L.

use ndarray::Array3;
use std::f64::consts::PI;

use crate::error::GridError;

/// Cubic periodic grid: n points per axis, box edge length L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    box_length: f64,
}

impl Grid {
    /// n must be a power of two >= 4; the spacing L/n is then exact
    /// whenever L is exactly representable.
    pub fn new(n: usize, box_length: f64) -> Result<Self, GridError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(GridError::BadResolution(n));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(GridError::BadBoxLength(box_length));
        }
        Ok(Grid { n, box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn point_count(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Cell volume h^3, the quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    /// Centered coordinate of grid index i along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        -0.5 * self.box_length + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

/// Per-axis angular frequencies and the cached |gamma|^2 array.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    grid: Grid,
    k_signed: Vec<i64>,
    gamma: Vec<f64>,
    gamma_diff: Vec<f64>,
    gamma_sq: Array3<f64>,
}

impl Wavenumbers {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let k_signed: Vec<i64> = (0..n)
            .map(|j| if j < n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        let gamma: Vec<f64> = k_signed
            .iter()
            .map(|&k| 2.0 * PI * k as f64 / grid.box_length())
            .collect();
        let nyq = -((n / 2) as i64);
        let gamma_diff: Vec<f64> = k_signed
            .iter()
            .zip(&gamma)
            .map(|(&k, &g)| if k == nyq { 0.0 } else { g })
            .collect();
        let mut gamma_sq = Array3::zeros((n, n, n));
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let g0 = gamma[i0];
                    let g1 = gamma[i1];
                    let g2 = gamma[i2];
                    gamma_sq[[i0, i1, i2]] = g0 * g0 + g1 * g1 + g2 * g2;
                }
            }
        }
        Wavenumbers {
            grid,
            k_signed,
            gamma,
            gamma_diff,
            gamma_sq,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Signed integer wavenumbers in storage order.
    pub fn k_signed(&self) -> &[i64] {
        &self.k_signed
    }

    /// Angular frequencies 2*pi*k/L in storage order (same for every axis).
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// The differentiation symbol: gamma with the unmatched plane k = -n/2
    /// zeroed. Every operator built from first derivatives (gradient,
    /// divergence, projection, pressure solve) uses this so they agree with
    /// each other mode by mode.
    pub fn gamma_diff(&self) -> &[f64] {
        &self.gamma_diff
    }

    pub fn gamma_sq(&self) -> &Array3<f64> {
        &self.gamma_sq
    }

    /// The unpaired highest mode k = -n/2. Odd spectral derivatives of it are
    /// sign-ambiguous, so differentiation zeroes this plane.
    pub fn is_nyquist(&self, j: usize) -> bool {
        self.k_signed[j] == -((self.grid.n() / 2) as i64)
    }
}
