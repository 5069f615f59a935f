//! Independent checks on produced solutions: the incompressibility
//! constraint, the full momentum-equation residual, the energy series and
//! its a-priori bound, and decay toward the box boundary.
//!
//! Everything here recomputes what it checks from the snapshots alone; none
//! of it shares code with the marching solver beyond the transform layer.

use ndarray::Zip;
use serde::Serialize;

use crate::error::VerifyError;
use crate::field::{SpectralScalarField, SpectralVectorField, VectorField};
use crate::picard::advect_spectral;
use crate::spectral::SpectralSpace;
use crate::stokes::{ForceSampler, PhysicalForce, Trajectory};

/// Summary of every check over one trajectory. All entries are nonnegative
/// and finite on a healthy run.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// Worst snapshot ratio max|div u| / max|grad u|.
    pub divergence_max_rel: f64,
    /// Per-component momentum residual relative to the largest term.
    pub nse_residual_max_rel: [f64; 3],
    /// Same residual unnormalized.
    pub nse_residual_max_abs: [f64; 3],
    /// Snapshot times the series below are sampled at.
    pub times: Vec<f64>,
    /// Kinetic energy sum |u|^2 h^3 per snapshot.
    pub energy: Vec<f64>,
    /// Worst snapshot ratio of boundary-shell amplitude to global amplitude.
    pub boundary_decay: f64,
}

impl ResidualReport {
    pub fn all_finite(&self) -> bool {
        let scalars = [self.divergence_max_rel, self.boundary_decay];
        scalars.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self
                .nse_residual_max_rel
                .iter()
                .chain(&self.nse_residual_max_abs)
                .all(|v| v.is_finite() && *v >= 0.0)
            && self.energy.iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

// ---- pointwise checks -------------------------------------------------------

/// max |div u| over the grid, relative to the largest velocity-gradient
/// entry; zero over zero counts as zero.
pub fn divergence_residual(space: &SpectralSpace, u: &VectorField) -> Result<f64, VerifyError> {
    let hat = space.forward(u)?;
    Ok(divergence_residual_spectral(space, &hat))
}

/// Same check straight from the spectrum.
pub fn divergence_residual_spectral(space: &SpectralSpace, hat: &SpectralVectorField) -> f64 {
    let div = space.inverse_scalar_unchecked(&space.spectral_divergence(hat));
    let num = div.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut den = 0.0f64;
    for comp in 0..3 {
        for axis in 0..3 {
            let d = space.inverse_scalar_unchecked(&SpectralScalarField::from_array(
                space.grid(),
                space.derivative(hat.component(comp), axis),
            ));
            den = d.data().iter().fold(den, |m, &v| m.max(v.abs()));
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Discrete kinetic energy sum |u|^2 h^3.
pub fn energy(u: &VectorField) -> f64 {
    let e = u.l2_norm();
    e * e
}

/// Largest |u| on the box-boundary shell over the largest |u| anywhere; zero
/// over zero counts as zero. With centered coordinates the boundary plane
/// |x_s| = L/2 is the index-0 plane of each axis (its positive twin is the
/// same plane by periodicity). Small values certify that the periodic box is
/// large enough to stand in for free space.
pub fn boundary_decay(u: &VectorField) -> f64 {
    let n = u.grid().n();
    let mag = |i0: usize, i1: usize, i2: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let v = u.component(k)[[i0, i1, i2]];
            s += v * v;
        }
        s.sqrt()
    };
    let mut shell = 0.0f64;
    let mut global = 0.0f64;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let m = mag(i0, i1, i2);
                global = global.max(m);
                if i0 == 0 || i1 == 0 || i2 == 0 {
                    shell = shell.max(m);
                }
            }
        }
    }
    if global == 0.0 {
        0.0
    } else {
        shell / global
    }
}

// ---- momentum residual ------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct NseOptions {
    /// Include the advection term. Off, the residual measures the forced
    /// diffusion equation alone.
    pub include_nonlinear: bool,
}

impl Default for NseOptions {
    fn default() -> Self {
        NseOptions {
            include_nonlinear: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NseResidual {
    pub max_rel: [f64; 3],
    pub max_abs: [f64; 3],
}

/// Derivative weights at `at` for the quadratic through three abscissae.
/// Exact for quadratics, hence second order on any spacing; the interior
/// case with `at` the middle point is the usual centered difference.
fn three_point_weights(t: [f64; 3], at: f64) -> [f64; 3] {
    let [a, b, c] = t;
    [
        (2.0 * at - b - c) / ((a - b) * (a - c)),
        (2.0 * at - a - c) / ((b - a) * (b - c)),
        (2.0 * at - a - b) / ((c - a) * (c - b)),
    ]
}

/// Pointwise max magnitude of each physical component of a spectrum.
fn component_maxima(space: &SpectralSpace, hat: &SpectralVectorField) -> [f64; 3] {
    let phys = space.inverse_unchecked(hat);
    let mut out = [0.0f64; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = phys.component(k).iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    }
    out
}

/// Momentum-equation residual du/dt + (u . grad) u - nu lap u + grad p - f
/// over the trajectory's snapshots, evaluated spectrally in space and with
/// second-order difference quotients in time. The result is the largest
/// pointwise residual per component, relative to the largest individual term
/// (and unnormalized alongside). Snapshots without a stored pressure
/// contribute no pressure-gradient term.
pub fn nse_residual(
    traj: &Trajectory,
    force: &dyn ForceSampler,
    opts: NseOptions,
) -> Result<NseResidual, VerifyError> {
    if traj.len() < 3 {
        return Err(VerifyError::TooFewSnapshots(traj.len()));
    }
    let space = traj.space();
    let nu = traj.viscosity();
    let times = traj.times();

    let mut max_abs = [0.0f64; 3];
    let mut term_scale = [0.0f64; 3];

    for i in 0..traj.len() {
        // three-point stencil window: shifted to one-sided at the endpoints
        let base = i.clamp(1, traj.len() - 2) - 1;
        let stencil = [times[base], times[base + 1], times[base + 2]];
        let w = three_point_weights(stencil, times[i]);

        let mut dudt = SpectralVectorField::zeros(traj.grid());
        for (off, &wk) in w.iter().enumerate() {
            dudt.add_scaled(traj.velocity_spectral(base + off), wk);
        }

        let u_hat = traj.velocity_spectral(i);
        let mut residual = dudt.clone();

        let mut visc = SpectralVectorField::zeros(traj.grid());
        for k in 0..3 {
            let lap = space.laplacian(u_hat.component(k));
            Zip::from(visc.component_mut(k)).and(&lap).for_each(|v, &l| *v = nu * l);
        }
        residual.add_scaled(&visc, -1.0);

        let adv = if opts.include_nonlinear {
            let a = advect_spectral(space, u_hat, u_hat).map_err(VerifyError::from)?;
            residual.add_scaled(&a, 1.0);
            Some(a)
        } else {
            None
        };

        let gradp = traj.pressure_spectral(i).map(|p| space.spectral_gradient(p));
        if let Some(g) = &gradp {
            residual.add_scaled(g, 1.0);
        }

        let f_hat = force.sample_spectral(times[i], space)?;
        residual.add_scaled(&f_hat, -1.0);

        let terms = [
            Some(&dudt),
            Some(&visc),
            adv.as_ref(),
            gradp.as_ref(),
            Some(&f_hat),
        ];
        for t in terms.into_iter().flatten() {
            let m = component_maxima(space, t);
            for k in 0..3 {
                term_scale[k] = term_scale[k].max(m[k]);
            }
        }
        let r = component_maxima(space, &residual);
        for k in 0..3 {
            max_abs[k] = max_abs[k].max(r[k]);
        }
    }

    let mut max_rel = [0.0f64; 3];
    for k in 0..3 {
        max_rel[k] = if term_scale[k] == 0.0 {
            0.0
        } else {
            max_abs[k] / term_scale[k]
        };
    }
    Ok(NseResidual { max_rel, max_abs })
}

// ---- energy bound -------------------------------------------------------------

/// The a-priori bound sqrt(E(0)) + integral of |f| in L2 against the observed
/// energy maximum; the force integral uses the trapezoid rule over the
/// snapshot times.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBound {
    pub observed_max: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn energy_bound(traj: &Trajectory, force: &dyn ForceSampler) -> Result<EnergyBound, VerifyError> {
    let space = traj.space();
    let times = traj.times();
    let mut force_l2: Vec<f64> = Vec::with_capacity(times.len());
    for &t in times {
        let f_hat = force.sample_spectral(t, space)?;
        force_l2.push(space.l2_norm_spectral(&f_hat));
    }
    let mut integral = 0.0;
    let e0 = {
        let v = space.l2_norm_spectral(traj.velocity_spectral(0));
        v * v
    };
    let mut observed = e0;
    for i in 1..times.len() {
        integral += 0.5 * (force_l2[i - 1] + force_l2[i]) * (times[i] - times[i - 1]);
        let v = space.l2_norm_spectral(traj.velocity_spectral(i));
        observed = observed.max(v * v);
    }
    let root = e0.sqrt() + integral;
    let bound = root * root;
    Ok(EnergyBound {
        observed_max: observed,
        bound,
        holds: observed <= bound * (1.0 + 1e-12),
    })
}

// ---- report assembly ------------------------------------------------------------

/// Run every check on one trajectory.
pub fn residual_report(
    traj: &Trajectory,
    force: &dyn ForceSampler,
    opts: NseOptions,
) -> Result<ResidualReport, VerifyError> {
    let space = traj.space();
    let nse = nse_residual(traj, force, opts)?;
    let mut divergence_max_rel = 0.0f64;
    let mut boundary = 0.0f64;
    let mut energies = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        divergence_max_rel =
            divergence_max_rel.max(divergence_residual_spectral(space, traj.velocity_spectral(i)));
        let u = traj.velocity(i);
        boundary = boundary.max(boundary_decay(&u));
        energies.push(energy(&u));
    }
    Ok(ResidualReport {
        divergence_max_rel,
        nse_residual_max_rel: nse.max_rel,
        nse_residual_max_abs: nse.max_abs,
        times: traj.times().to_vec(),
        energy: energies,
        boundary_decay: boundary,
    })
}

// ---- manufactured solution -------------------------------------------------------

/// Closed-form solenoidal flow on the 2 pi box used to exercise the residual
/// machinery end to end: u = g(t) (sin x1, sin x2, sin x0) with the decaying
/// amplitude g(t) = amplitude * exp(-t). Its advection term is divergence
/// free, so the exact pressure is zero, and the force below balances the
/// momentum equation identically.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSolution {
    pub viscosity: f64,
    pub amplitude: f64,
}

impl ManufacturedSolution {
    pub fn g(&self, t: f64) -> f64 {
        self.amplitude * (-t).exp()
    }

    fn g_prime(&self, t: f64) -> f64 {
        -self.g(t)
    }

    /// Exact velocity snapshot. Only meaningful on a box of length 2 pi.
    pub fn velocity(&self, grid: crate::grid::Grid, t: f64) -> VectorField {
        let g = self.g(t);
        VectorField::from_fn(grid, |x, y, z| [g * y.sin(), g * z.sin(), g * x.sin()])
    }

    /// Force that makes the velocity above solve the momentum equation with
    /// zero pressure: (g' + nu g) base + g^2 advection.
    pub fn force(&self) -> PhysicalForce<impl Fn(f64, crate::grid::Grid) -> VectorField + Sync + '_> {
        let me = *self;
        PhysicalForce::new(move |t: f64, grid: crate::grid::Grid| {
            let lin = me.g_prime(t) + me.viscosity * me.g(t);
            let q = me.g(t) * me.g(t);
            VectorField::from_fn(grid, |x, y, z| {
                [
                    lin * y.sin() + q * z.sin() * y.cos(),
                    lin * z.sin() + q * x.sin() * z.cos(),
                    lin * x.sin() + q * y.sin() * x.cos(),
                ]
            })
        })
    }

    /// Exact trajectory sampled at the given times, zero pressure attached.
    pub fn trajectory(
        &self,
        space: &std::sync::Arc<SpectralSpace>,
        times: &[f64],
    ) -> Result<Trajectory, VerifyError> {
        let mut velocity = Vec::with_capacity(times.len());
        let mut pressure = Vec::with_capacity(times.len());
        for &t in times {
            velocity.push(space.forward(&self.velocity(space.grid(), t))?);
            pressure.push(Some(SpectralScalarField::zeros(space.grid())));
        }
        Trajectory::from_parts(
            std::sync::Arc::clone(space),
            self.viscosity,
            times.to_vec(),
            velocity,
            pressure,
        )
        .map_err(VerifyError::from)
    }
}
