//! Shared oracles for the integration tests: a classical fourth-order
//! reference integrator for both frames, independent of the splitting
//! scheme it is used to check.

use driftshear::field::{forward_transform, inverse_transform, SpectralField};
use driftshear::grid::Grid;
use driftshear::params::FlowParams;
use driftshear::solver::Frame;
use num_complex::Complex64;

/// Spectral second derivative of physical samples.
fn second_derivative(grid: Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = forward_transform(values);
    for (c, m) in coeffs.iter_mut().zip(grid.modes()) {
        *c *= -((m * m) as f64);
    }
    inverse_transform(&coeffs)
}

fn first_derivative(grid: Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = forward_transform(values);
    for (c, m) in coeffs.iter_mut().zip(grid.modes()) {
        *c *= Complex64::new(0.0, m as f64);
    }
    inverse_transform(&coeffs)
}

fn rhs(grid: Grid, params: &FlowParams, frame: Frame, t: f64, u: &[Complex64]) -> Vec<Complex64> {
    match frame {
        Frame::Lab => {
            let c = params.speed();
            let ak = params.alpha * params.k as f64;
            let nu = params.nu;
            let ksq = (params.k as f64) * (params.k as f64);
            let d2 = second_derivative(grid, u);
            grid.nodes()
                .zip(u.iter().zip(&d2))
                .map(|(y, (v, d))| {
                    let advect = Complex64::new(0.0, -ak * (y - c * t).sin()) * v;
                    advect - nu * ksq * v + nu * d
                })
                .collect()
        }
        Frame::Moving => {
            let scaled = params.scaled();
            let sgn = params.k.signum() as f64;
            let d1 = first_derivative(grid, u);
            let d2 = second_derivative(grid, u);
            grid.nodes()
                .zip(u.iter().zip(d1.iter().zip(&d2)))
                .map(|(y, (v, (dv, d2v)))| {
                    scaled.varsigma * dv + Complex64::new(0.0, -sgn * y.sin()) * v
                        + scaled.mu * d2v
                })
                .collect()
        }
    }
}

/// Classical RK4 on the method-of-lines system, used as the dense reference
/// for the order measurement of the splitting scheme.
pub fn rk4_reference(
    theta0: &SpectralField,
    params: &FlowParams,
    frame: Frame,
    t_end: f64,
    dt: f64,
) -> SpectralField {
    let grid = theta0.grid();
    let steps = (t_end / dt).round() as usize;
    let h = t_end / steps as f64;
    let mut u = theta0.values().to_vec();
    let axpy = |u: &[Complex64], k: &[Complex64], a: f64| -> Vec<Complex64> {
        u.iter().zip(k).map(|(x, y)| x + y * a).collect()
    };
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = rhs(grid, params, frame, t, &u);
        let k2 = rhs(grid, params, frame, t + 0.5 * h, &axpy(&u, &k1, 0.5 * h));
        let k3 = rhs(grid, params, frame, t + 0.5 * h, &axpy(&u, &k2, 0.5 * h));
        let k4 = rhs(grid, params, frame, t + h, &axpy(&u, &k3, h));
        for (j, x) in u.iter_mut().enumerate() {
            *x += (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]) * (h / 6.0);
        }
    }
    SpectralField::from_values(grid, u).expect("same grid")
}

/// Relative L^2 error of the splitting solution at `t_end` against the
/// dense RK4 reference.
pub fn splitting_error(
    theta0: &SpectralField,
    params: &FlowParams,
    frame: Frame,
    t_end: f64,
    dt: f64,
    reference: &SpectralField,
) -> f64 {
    let config = driftshear::SolverConfig::new(dt, t_end, usize::MAX, frame).expect("valid");
    let traj = driftshear::solver::solve(theta0, params, &config).expect("solve");
    let last = traj.states.last().expect("at least one snapshot");
    last.sub(reference).expect("same grid").sobolev_norm(0.0) / reference.sobolev_norm(0.0)
}
