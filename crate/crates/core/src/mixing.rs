use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::params::FlowParams;
use crate::solver::{phase, Trajectory};

/// Default lower limit of the time average.
pub const T0: f64 = 1.0;

/// Snapshot spacing rule for the time quadrature: the integrand oscillates
/// at O(k) phase rate, and the functional itself shrinks like c^{1/3}/T, so
/// the stored step tightens with c to keep the relative error uniform.
pub fn quadrature_step(c: f64) -> f64 {
    if c > 0.0 {
        (c / 20.0).min(0.05)
    } else {
        0.05
    }
}

/// One evaluation of the time-averaged mixing functional against its bound.
#[derive(Debug, Clone, Copy)]
pub struct MixingReport {
    pub t_horizon: f64,
    pub functional_value: f64,
    pub bound_value: f64,
    pub t0: f64,
    pub c: f64,
    pub k: i32,
    pub alpha: f64,
    pub h1_initial: f64,
}

fn check_horizon(t_horizon: f64, c: f64) -> Result<()> {
    if t_horizon <= 1.0 {
        return Err(Error::OutOfRange { name: "T", value: t_horizon, range: "(1, pi/c]" });
    }
    if c > 0.0 && t_horizon > PI / c * (1.0 + 1e-9) {
        return Err(Error::OutOfRange { name: "T", value: t_horizon, range: "(1, pi/c]" });
    }
    Ok(())
}

/// (1/T) int_1^T theta(.,t) dt by trapezoidal quadrature over the stored
/// snapshots of an inviscid trajectory.
pub fn time_average_field(traj: &Trajectory, t_horizon: f64) -> Result<SpectralField> {
    if traj.params.nu != 0.0 {
        return Err(Error::RequiresInviscid(traj.params.nu));
    }
    check_horizon(t_horizon, traj.params.speed())?;

    let slack = 1e-9 * t_horizon.max(1.0);
    let lo = traj
        .times
        .iter()
        .position(|&t| (t - T0).abs() <= slack)
        .ok_or(Error::TrajectoryTooShort(T0, t_horizon))?;
    let hi = traj
        .times
        .iter()
        .position(|&t| (t - t_horizon).abs() <= slack)
        .ok_or(Error::TrajectoryTooShort(T0, t_horizon))?;
    if hi <= lo {
        return Err(Error::TrajectoryTooShort(T0, t_horizon));
    }

    let grid = traj.states[0].grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in lo..hi {
        let h = traj.times[i + 1] - traj.times[i];
        let (a, b) = (traj.states[i].values(), traj.states[i + 1].values());
        for (j, s) in acc.iter_mut().enumerate() {
            *s += (a[j] + b[j]) * (0.5 * h);
        }
    }
    let scale = Complex64::new(1.0 / t_horizon, 0.0);
    for s in &mut acc {
        *s *= scale;
    }
    SpectralField::from_values(grid, acc)
}

/// H^{-1} norm of the time-averaged field.
pub fn mixing_functional(traj: &Trajectory, t_horizon: f64) -> Result<f64> {
    Ok(time_average_field(traj, t_horizon)?.sobolev_norm(-1.0))
}

/// Streaming evaluation of the mixing functional at several horizons in one
/// pass over the closed-form inviscid evolution. Equivalent to
/// [`time_average_field`] on a trajectory stored at the same nodes, but
/// without retaining the states (the small-c horizons need ~10^5 of them).
pub fn scan_functional(
    theta0: &SpectralField,
    params: &FlowParams,
    horizons: &[f64],
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    if params.nu != 0.0 {
        return Err(Error::RequiresInviscid(params.nu));
    }
    let c = params.speed();
    let mut wanted: Vec<f64> = Vec::new();
    for &t in horizons {
        check_horizon(t, c)?;
        wanted.push(t);
    }
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_max = *wanted.last().expect("at least one horizon");

    let grid = theta0.grid();
    let ak = params.alpha * params.k as f64;
    let eval_values = |t: f64| -> Vec<Complex64> {
        grid.nodes()
            .zip(theta0.values())
            .map(|(y, v)| v * Complex64::from_polar(1.0, -ak * phase(y, t, c)))
            .collect()
    };

    let n_steps = ((t_max - T0) / step).ceil().max(1.0) as usize;
    let h = (t_max - T0) / n_steps as f64;

    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut prev = eval_values(T0);
    let mut out = Vec::with_capacity(wanted.len());
    let mut next = 0usize;

    for j in 1..=n_steps {
        let t = T0 + j as f64 * h;
        let cur = eval_values(t);
        for (s, (a, b)) in acc.iter_mut().zip(prev.iter().zip(&cur)) {
            *s += (a + b) * (0.5 * h);
        }
        prev = cur;
        while next < wanted.len() && t >= wanted[next] - 0.5 * h {
            let avg: Vec<Complex64> = acc.iter().map(|s| s / t).collect();
            let field = SpectralField::from_values(grid, avg)?;
            out.push((t, field.sobolev_norm(-1.0)));
            next += 1;
        }
    }
    Ok(out)
}

/// Scaling bound C (1/T) ((ln T)^2 / (c |alpha k|^2))^{1/3} ||theta0||_{H^1}.
pub fn theoretical_bound(
    t_horizon: f64,
    c: f64,
    alpha: f64,
    k: i32,
    h1_initial: f64,
    big_c: f64,
) -> Result<f64> {
    if !(t_horizon > 1.0) {
        return Err(Error::OutOfRange { name: "T", value: t_horizon, range: "(1, inf)" });
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::OutOfRange { name: "c", value: c, range: "(0, 1]" });
    }
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    let ak = alpha * k.unsigned_abs() as f64;
    let ln_t = t_horizon.ln();
    Ok(big_c / t_horizon * (ln_t * ln_t / (c * ak * ak)).powf(1.0 / 3.0) * h1_initial)
}

/// Stationary point of F(delta) = ln T/(|k| T delta) + delta^2/(c T):
/// delta^3 = c ln T / (2 |k|).
pub fn optimal_delta(t_horizon: f64, c: f64, k: i32) -> Result<f64> {
    if !(t_horizon > 1.0) {
        return Err(Error::OutOfRange { name: "T", value: t_horizon, range: "(1, inf)" });
    }
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    Ok((c * t_horizon.ln() / (2.0 * k.unsigned_abs() as f64)).powf(1.0 / 3.0))
}

/// The balance F(delta) the stationary point minimises.
pub fn delta_objective(delta: f64, t_horizon: f64, c: f64, k: i32) -> f64 {
    let ka = k.unsigned_abs() as f64;
    t_horizon.ln() / (ka * t_horizon * delta) + delta * delta / (c * t_horizon)
}

/// Measures of the phase-derivative partition of the strip T x [t0, T].
///
/// D carries a lower bound on the y-derivative of the phase, E on the
/// t-derivative, and C is the doubly-critical remainder.
#[derive(Debug, Clone, Copy)]
pub struct CriticalSets {
    pub delta: f64,
    pub epsilon: f64,
    pub meas_d: f64,
    pub meas_e: f64,
    pub meas_c: f64,
    /// Closed-form measure of C per full period cell:
    /// (2/c) [arccos(-delta) - arccos(delta)] [2 arcsin(epsilon)].
    pub analytic_c_per_cell: f64,
}

pub fn critical_sets(
    delta: f64,
    epsilon: f64,
    c: f64,
    t0: f64,
    t_horizon: f64,
    quad_n: usize,
) -> Result<CriticalSets> {
    for (name, v) in [("delta", delta), ("epsilon", epsilon)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::OutOfRange { name, value: v, range: "(0, 1)" });
        }
    }
    if !(t0 < t_horizon) || (c > 0.0 && t_horizon > PI / c * (1.0 + 1e-9)) {
        return Err(Error::OutOfRange { name: "T", value: t_horizon, range: "(t0, pi/c]" });
    }
    if quad_n == 0 {
        return Err(Error::OutOfRange { name: "quad_n", value: 0.0, range: "[1, inf)" });
    }

    let dy = 2.0 * PI / quad_n as f64;
    let dt = (t_horizon - t0) / quad_n as f64;
    let cell = dy * dt;
    let (mut nd, mut ne, mut nc) = (0u64, 0u64, 0u64);
    for j in 0..quad_n {
        let t = t0 + (j as f64 + 0.5) * dt;
        for i in 0..quad_n {
            let y = (i as f64 + 0.5) * dy;
            if (0.5 * c * t - y).cos().abs() >= delta {
                nd += 1;
            } else if (y - c * t).sin().abs() >= epsilon {
                ne += 1;
            } else {
                nc += 1;
            }
        }
    }
    let analytic = 2.0 / c * ((-delta).acos() - delta.acos()) * (2.0 * epsilon.asin());
    Ok(CriticalSets {
        delta,
        epsilon,
        meas_d: nd as f64 * cell,
        meas_e: ne as f64 * cell,
        meas_c: nc as f64 * cell,
        analytic_c_per_cell: analytic,
    })
}

/// y-derivative of the advection phase:
/// d/dy psi = (2/c) sin(ct/2) cos(ct/2 - y).
pub fn phase_y_derivative(y: f64, t: f64, c: f64) -> f64 {
    2.0 / c * (0.5 * c * t).sin() * (0.5 * c * t - y).cos()
}

/// Monte-Carlo check of the lower bound |d/dy psi| >= (2/pi) t delta on the
/// set D for t <= pi/c. Returns the worst observed ratio
/// ((2/pi) t delta) / |d/dy psi|, which must not exceed 1.
pub fn phase_gradient_bound_check(
    delta: f64,
    c: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange { name: "delta", value: delta, range: "(0, 1)" });
    }
    let t_max = PI / c;
    let mut worst: f64 = 0.0;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted < samples && attempts < samples.saturating_mul(20) {
        attempts += 1;
        let t = rng.gen_range(0.0..1.0f64).max(1e-12) * t_max;
        let y = rng.gen_range(0.0..2.0 * PI);
        if (0.5 * c * t - y).cos().abs() < delta {
            continue;
        }
        accepted += 1;
        let bound = 2.0 / PI * t * delta;
        let ratio = bound / phase_y_derivative(y, t, c).abs();
        if ratio > worst {
            worst = ratio;
        }
    }
    Ok(worst)
}

/// Calibrate the scaling constant as the largest functional/bound ratio
/// over a (c, T) grid. Validation on a disjoint grid checks that the same
/// constant still dominates.
pub fn calibrate_bound_constant(
    theta0: &SpectralField,
    alpha: f64,
    k: i32,
    c_values: &[f64],
    horizons_per_c: usize,
) -> Result<f64> {
    let h1 = theta0.sobolev_norm(1.0);
    let mut big_c: f64 = 0.0;
    for &c in c_values {
        for (t, m) in bound_scan(theta0, alpha, k, c, horizons_per_c)? {
            let bound1 = theoretical_bound(t, c, alpha, k, h1, 1.0)?;
            big_c = big_c.max(m / bound1);
        }
    }
    Ok(big_c)
}

/// Functional values at log-spaced horizons in [2, pi/c] for one speed.
pub fn bound_scan(
    theta0: &SpectralField,
    alpha: f64,
    k: i32,
    c: f64,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    let params = FlowParams::new(alpha, 0.0, k, crate::params::TranslationLaw::Explicit(c))?;
    let t_max = PI / c;
    let t_min = 2.0f64.min(0.5 * t_max);
    let horizons: Vec<f64> = (0..count)
        .map(|i| t_min * (t_max / t_min).powf(i as f64 / (count - 1).max(1) as f64))
        .collect();
    scan_functional(theta0, &params, &horizons, quadrature_step(c))
}

/// Assemble report rows (c, T, functional, bound, ratio) with a calibrated
/// constant.
pub fn mixing_reports(
    theta0: &SpectralField,
    alpha: f64,
    k: i32,
    c: f64,
    horizons_per_c: usize,
    big_c: f64,
) -> Result<Vec<MixingReport>> {
    let h1 = theta0.sobolev_norm(1.0);
    bound_scan(theta0, alpha, k, c, horizons_per_c)?
        .into_iter()
        .map(|(t, m)| {
            Ok(MixingReport {
                t_horizon: t,
                functional_value: m,
                bound_value: theoretical_bound(t, c, alpha, k, h1, big_c)?,
                t0: T0,
                c,
                k,
                alpha,
                h1_initial: h1,
            })
        })
        .collect()
}

pub fn reports_csv(rows: &[MixingReport], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "c,T,functional,bound,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.c,
            r.t_horizon,
            r.functional_value,
            r.bound_value,
            r.functional_value / r.bound_value
        )?;
    }
    Ok(())
}

pub fn critical_sets_csv(rows: &[CriticalSets], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "delta,epsilon,meas_D,meas_E,meas_C,analytic_C")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.delta, r.epsilon, r.meas_d, r.meas_e, r.meas_c, r.analytic_c_per_cell
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::norms::dual_h_minus1_oracle;
    use crate::params::TranslationLaw;
    use crate::solver::inviscid_trajectory;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inviscid(alpha: f64, k: i32, c: f64) -> FlowParams {
        FlowParams::new(alpha, 0.0, k, TranslationLaw::Explicit(c)).unwrap()
    }

    fn uniform_times(t0: f64, t1: f64, h: f64) -> Vec<f64> {
        let n = ((t1 - t0) / h).round() as usize;
        (0..=n).map(|i| t0 + i as f64 * (t1 - t0) / n as f64).collect()
    }

    #[test]
    fn constant_integrand_average() {
        // With alpha = 0 the inviscid state never moves, so the average is
        // (T-1)/T times the initial field.
        let grid = Grid::new(64).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let params = inviscid(0.0, 1, 0.1);
        let t_horizon = 20.0;
        let traj =
            inviscid_trajectory(&theta0, &params, &uniform_times(T0, t_horizon, 0.005)).unwrap();
        let avg = time_average_field(&traj, t_horizon).unwrap();
        let expect = (t_horizon - 1.0) / t_horizon;
        for (a, b) in avg.values().iter().zip(theta0.values()) {
            assert!((a - b * expect).norm() < 1e-12);
        }
        let m = mixing_functional(&traj, t_horizon).unwrap();
        assert!((m - expect * theta0.sobolev_norm(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_datum_gives_zero_functional() {
        let grid = Grid::new(64).unwrap();
        let theta0 = SpectralField::zero(grid);
        let params = inviscid(1.0, 1, 0.1);
        let traj = inviscid_trajectory(&theta0, &params, &uniform_times(T0, 10.0, 0.01)).unwrap();
        assert_eq!(mixing_functional(&traj, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_horizon_outside_window() {
        let grid = Grid::new(64).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let params = inviscid(1.0, 1, 0.1);
        let traj = inviscid_trajectory(&theta0, &params, &uniform_times(T0, 40.0, 0.01)).unwrap();
        assert!(time_average_field(&traj, 0.5).is_err());
        assert!(time_average_field(&traj, 40.0).is_err()); // > pi/c = 31.4
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let grid = Grid::new(256).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let c = 0.1;
        let params = inviscid(1.0, 1, c);
        let t_horizon = PI / c;
        let h = quadrature_step(c);
        let coarse = inviscid_trajectory(&theta0, &params, &uniform_times(T0, t_horizon, h))
            .unwrap();
        let fine = inviscid_trajectory(&theta0, &params, &uniform_times(T0, t_horizon, h / 2.0))
            .unwrap();
        let mc = mixing_functional(&coarse, t_horizon).unwrap();
        let mf = mixing_functional(&fine, t_horizon).unwrap();
        assert!((mc - mf).abs() / mf <= 1e-6, "coarse {mc} fine {mf}");
    }

    #[test]
    fn scan_matches_trajectory_average() {
        let grid = Grid::new(128).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let c = 0.2;
        let params = inviscid(1.0, 1, c);
        let t_horizon = 9.0;
        let h = (t_horizon - T0) / 1600.0;
        let traj =
            inviscid_trajectory(&theta0, &params, &uniform_times(T0, t_horizon, h)).unwrap();
        let direct = mixing_functional(&traj, t_horizon).unwrap();
        let scanned = scan_functional(&theta0, &params, &[t_horizon], h).unwrap();
        assert_eq!(scanned.len(), 1);
        assert!((scanned[0].0 - t_horizon).abs() < 1e-9);
        assert!((scanned[0].1 - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn dual_oracle_brackets_functional() {
        let grid = Grid::new(128).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let params = inviscid(1.0, 1, 0.2);
        let traj = inviscid_trajectory(&theta0, &params, &uniform_times(T0, 8.0, 0.01)).unwrap();
        let avg = time_average_field(&traj, 8.0).unwrap();
        let functional = mixing_functional(&traj, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dual = dual_h_minus1_oracle(&avg, 100, &mut rng);
        assert!(dual <= functional + 1e-12);
        assert!(functional <= dual + 1e-12);
    }

    #[test]
    fn optimal_delta_closed_form_and_minimiser() {
        // Unit stationary point: c ln T / (2|k|) = 1 at ln T = 2, c = k = 1.
        let t = (2.0f64).exp();
        assert!((optimal_delta(t, 1.0, 1).unwrap() - 1.0).abs() < 1e-12);

        let d = optimal_delta(10.0, 0.1, 1).unwrap();
        assert!((d - (0.1 * 10.0f64.ln() / 2.0).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((d - 0.4864765).abs() < 1e-6);

        // Golden-section search oracle over a bracket.
        let f = |x: f64| delta_objective(x, 10.0, 0.1, 1);
        let (mut a, mut b) = (1e-4, 10.0);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let golden = 0.5 * (a + b);
        assert!((golden - d).abs() < 1e-6, "golden {golden} vs {d}");

        // Minimiser property against random probes.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fd = f(d);
        for _ in 0..50 {
            let probe = rng.gen_range(1e-3..5.0);
            assert!(fd <= f(probe) + 1e-12);
        }
    }

    #[test]
    fn critical_sets_partition_and_analytic_cell() {
        let c = 0.1;
        let t0 = 1.0;
        let t_horizon = PI / c;
        let cs = critical_sets(0.1, 0.1, c, t0, t_horizon, 512).unwrap();

        // Disjoint classification: the three measures tile the strip exactly.
        let strip = 2.0 * PI * (t_horizon - t0);
        assert!((cs.meas_d + cs.meas_e + cs.meas_c - strip).abs() < 1e-9 * strip);

        // Closed-form per-cell measure of C.
        assert!((cs.analytic_c_per_cell - 0.80268).abs() < 1e-4);
        let asin01 = 0.1f64.asin();
        assert!((cs.analytic_c_per_cell - 20.0 * (2.0 * asin01) * (2.0 * asin01)).abs() < 1e-12);

        // Quadrature count on the (u, v) cell as an independent oracle:
        // meas = (2/c) |{u in [0,pi): |cos u| < delta}| |{v: |sin v| < eps}|.
        let n = 40_000;
        let mut u_meas = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * PI / n as f64;
            if u.cos().abs() < 0.1 {
                u_meas += PI / n as f64;
            }
        }
        let mut v_meas = 0.0;
        for i in 0..n {
            let v = -0.5 * PI + (i as f64 + 0.5) * PI / n as f64;
            if v.sin().abs() < 0.1 {
                v_meas += PI / n as f64;
            }
        }
        let oracle = 2.0 / c * u_meas * v_meas;
        assert!((cs.analytic_c_per_cell - oracle).abs() < 1e-3);
    }

    #[test]
    fn saturating_thresholds_shrink_d() {
        let c = 0.1;
        let cs = critical_sets(0.999, 0.999, c, 1.0, PI / c, 256).unwrap();
        let strip = 2.0 * PI * (PI / c - 1.0);
        assert!(cs.meas_d < 0.1 * strip);
        assert!(cs.meas_e + cs.meas_c > 0.9 * strip);
    }

    #[test]
    fn phase_gradient_lower_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let worst = phase_gradient_bound_check(0.2, 0.1, 100_000, &mut rng).unwrap();
        assert!(worst <= 1.0 + 1e-12, "worst ratio {worst}");
        assert!(worst > 0.5, "sampling should approach the extremal case");

        // Extremal case: t = pi/c and cos(ct/2 - y) = delta saturate the
        // bound exactly.
        let (c, delta): (f64, f64) = (0.1, 0.2);
        let t = PI / c;
        let y = 0.5 * c * t - delta.acos();
        let ratio = (2.0 / PI * t * delta) / phase_y_derivative(y, t, c).abs();
        assert!((ratio - 1.0).abs() < 1e-12);

        // Concavity endpoint: at y = ct/2 the derivative is (2/c) sin(ct/2),
        // which dominates (2/pi) t for every t in (0, pi/c].
        for frac in [0.1, 0.5, 0.9, 1.0] {
            let t = frac * PI / c;
            assert!((2.0 / c) * (0.5 * c * t).sin() >= 2.0 / PI * t - 1e-12);
        }
    }

    #[test]
    fn bound_constant_calibration_dominates_training_grid() {
        let grid = Grid::new(256).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let big_c = calibrate_bound_constant(&theta0, 1.0, 1, &[0.15, 0.3], 6).unwrap();
        assert!(big_c > 0.0);
        for (t, m) in bound_scan(&theta0, 1.0, 1, 0.15, 6).unwrap() {
            let b = theoretical_bound(t, 0.15, 1.0, 1, theta0.sobolev_norm(1.0), big_c).unwrap();
            assert!(m <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bound_homogeneity_in_k() {
        let b1 = theoretical_bound(10.0, 0.1, 1.0, 1, 1.0, 1.0).unwrap();
        let b2 = theoretical_bound(10.0, 0.1, 1.0, 2, 1.0, 1.0).unwrap();
        assert!((b2 / b1 - 2.0f64.powf(-2.0 / 3.0)).abs() < 1e-12);
    }
}
