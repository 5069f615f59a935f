//! Three dimensional transforms between sample and coefficient space.
//!
//! Conventions, with h = L/n and gamma_k = 2 pi k / L on the centered box:
//!
//!   forward:  U(gamma) = h^3 sum_x u(x) exp(+i gamma . x)
//!   inverse:  u(x) = L^-3 sum_gamma U(gamma) exp(-i gamma . x)
//!
//! The round trip is the exact identity because h^3 n^3 / L^3 = 1. With
//! x = -L/2 + j h the boundary offset contributes exp(+/- i pi k) per axis,
//! which equals (-1)^j at storage index j for even n; both directions fold
//! that sign into a single pass over the array.

use ndarray::{Array3, Zip};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::grid::Grid;

pub struct TransformEngine {
    grid: Grid,
    plus: Arc<dyn Fft<f64>>,
    minus: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TransformEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformEngine")
            .field("grid", &self.grid)
            .finish()
    }
}

/// Run lane transforms along one axis of a cube, in place.
fn transform_axis(fft: &Arc<dyn Fft<f64>>, data: &mut Array3<Complex64>, axis: usize) {
    let n = data.dim().0;
    let run = |slice: &mut [Complex64]| {
        slice.par_chunks_mut(n * n).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, chunk| fft.process_with_scratch(chunk, scratch),
        );
    };
    if axis == 2 {
        run(data.as_slice_mut().expect("cube is standard layout"));
        return;
    }
    // Strided axis: work on a standard-layout copy with the axis moved last.
    let (perm, back) = match axis {
        0 => ([1, 2, 0], [2, 0, 1]),
        1 => ([0, 2, 1], [0, 2, 1]),
        _ => unreachable!("axis out of range"),
    };
    let mut work = data
        .view()
        .permuted_axes(perm)
        .as_standard_layout()
        .into_owned();
    run(work.as_slice_mut().expect("copy is standard layout"));
    data.assign(&work.view().permuted_axes(back));
}

/// Multiply by factor * (-1)^(j0+j1+j2), the centered-box phase.
fn apply_signed_scale(data: &mut Array3<Complex64>, factor: f64) {
    Zip::indexed(data).for_each(|(j0, j1, j2), v| {
        let sign = if (j0 + j1 + j2) % 2 == 0 { 1.0 } else { -1.0 };
        *v *= sign * factor;
    });
}

impl TransformEngine {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        TransformEngine {
            grid,
            plus: planner.plan_fft(grid.n(), FftDirection::Inverse),
            minus: planner.plan_fft(grid.n(), FftDirection::Forward),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Sample values to coefficients.
    pub fn forward_array(&self, samples: &Array3<f64>) -> Array3<Complex64> {
        let mut data = samples.mapv(|v| Complex64::new(v, 0.0));
        for axis in 0..3 {
            transform_axis(&self.plus, &mut data, axis);
        }
        let h = self.grid.spacing();
        apply_signed_scale(&mut data, h * h * h);
        data
    }

    /// Coefficients to sample values. Returns the real part together with
    /// the largest imaginary magnitude left over, which the caller compares
    /// against the field scale.
    pub fn inverse_array(&self, modes: &Array3<Complex64>) -> (Array3<f64>, f64) {
        let mut data = modes.clone();
        let vol = self.grid.box_length().powi(3);
        apply_signed_scale(&mut data, 1.0 / vol);
        for axis in 0..3 {
            transform_axis(&self.minus, &mut data, axis);
        }
        let mut residue = 0.0f64;
        let out = data.mapv(|v| {
            residue = residue.max(v.im.abs());
            v.re
        });
        (out, residue)
    }
}
