//! Consolidated fast invariant suite behind the `check` subcommand: one
//! deterministic pass over the core, solver, mixing and hypo invariants
//! that examines fixed probes plus seeded random fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::SpectralField;
use crate::grid::Grid;
use crate::hypo;
use crate::mixing;
use crate::norms::dual_h_minus1_oracle;
use crate::params::{FlowParams, TranslationLaw};
use crate::solver;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> SpectralField {
    let values: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SpectralField::from_values(grid, values).expect("matching grid")
}

/// Run every check; failures never panic, they are reported in the list.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let grid = Grid::default_resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Transform round trip and Parseval on random fields.
    {
        let mut worst_rt: f64 = 0.0;
        let mut worst_pv: f64 = 0.0;
        for _ in 0..10 {
            let f = random_field(grid, &mut rng);
            let back = crate::field::inverse_transform(&crate::field::forward_transform(f.values()));
            let err: f64 = f
                .values()
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let norm = f.sobolev_norm(0.0) / grid.weight().sqrt();
            worst_rt = worst_rt.max(err / norm);
            let quad: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.weight();
            let spec = f.sobolev_norm(0.0).powi(2);
            worst_pv = worst_pv.max((quad - spec).abs() / quad);
        }
        out.push(outcome(
            "core.round_trip",
            worst_rt <= 1e-13,
            format!("max relative error {worst_rt:.3e}"),
        ));
        out.push(outcome(
            "core.parseval",
            worst_pv <= 1e-12,
            format!("max relative deviation {worst_pv:.3e}"),
        ));
    }

    // Sobolev closed forms.
    {
        let e1 = SpectralField::single_mode(grid, 1);
        let c2 = SpectralField::cos_2y(grid);
        let a = (e1.sobolev_norm(-1.0) - PI.sqrt()).abs();
        let b = (c2.sobolev_norm(1.0) - (5.0 * PI).sqrt()).abs();
        out.push(outcome(
            "core.sobolev_closed_forms",
            a < 1e-12 && b < 1e-12,
            format!("deviations {a:.3e}, {b:.3e}"),
        ));
    }

    // Duality oracle never exceeds the spectral norm and attains it.
    {
        let f = random_field(grid, &mut rng);
        let spectral = f.sobolev_norm(-1.0);
        let dual = dual_h_minus1_oracle(&f, 100, &mut rng);
        out.push(outcome(
            "core.dual_h_minus1",
            dual <= spectral + 1e-12 && dual >= 0.99 * spectral,
            format!("dual {dual:.6} vs spectral {spectral:.6}"),
        ));
    }

    // Pure-heat exactness of the splitting at alpha = 0.
    {
        let theta0 = SpectralField::cos_2y(grid);
        let nu = 0.05;
        let params = FlowParams::new(0.0, nu, 1, TranslationLaw::Explicit(0.3)).expect("valid");
        let stepped = solver::strang_step(&theta0, 0.0, 0.01, &params, solver::Frame::Lab)
            .expect("valid step");
        let mut worst: f64 = 0.0;
        for (i, m) in grid.modes().enumerate() {
            let factor = (-nu * ((m * m) as f64 + 1.0) * 0.01).exp();
            worst = worst.max((stepped.coeffs()[i] - theta0.coeffs()[i] * factor).norm());
        }
        out.push(outcome("solver.pure_heat", worst <= 1e-14, format!("max deviation {worst:.3e}")));
    }

    // Inviscid conservation and periodicity over one full period. The step
    // is snapped so the final step lands exactly on t = 2 pi / c.
    {
        let c = 0.1;
        let theta0 = SpectralField::cos_2y(grid);
        let params = FlowParams::new(1.0, 0.0, 1, TranslationLaw::Explicit(c)).expect("valid");
        let period = 2.0 * PI / c;
        let dt = period / (period / 0.01).ceil();
        let config = solver::SolverConfig::new(dt, period, 20, solver::Frame::Lab).expect("valid");
        let traj = solver::solve(&theta0, &params, &config).expect("solve");
        let n0 = traj.norms[0];
        let drift = traj.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max);
        let period_err =
            traj.states.last().unwrap().sub(&theta0).unwrap().sobolev_norm(0.0) / n0;
        out.push(outcome(
            "solver.inviscid_conservation",
            drift <= 1e-10,
            format!("max norm drift {drift:.3e}"),
        ));
        out.push(outcome(
            "solver.inviscid_periodicity",
            period_err <= 1e-10,
            format!("relative distance {period_err:.3e}"),
        ));
    }

    // Viscous monotonicity.
    {
        let theta0 = SpectralField::cos_2y(grid);
        let params = FlowParams::new(1.0, 1e-2, 1, TranslationLaw::Explicit(0.1)).expect("valid");
        let config = solver::SolverConfig::new(0.01, 30.0, 10, solver::Frame::Lab).expect("valid");
        let traj = solver::solve(&theta0, &params, &config).expect("solve");
        let monotone = traj.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        out.push(outcome(
            "solver.monotone_dissipation",
            monotone,
            format!("{} snapshots", traj.len()),
        ));
    }

    // Frame-change round trip.
    {
        let theta0 = SpectralField::cos_2y(grid);
        let params = FlowParams::new(1.5, 1e-2, 2, TranslationLaw::Explicit(0.2)).expect("valid");
        let config = solver::SolverConfig::new(0.01, 2.0, 50, solver::Frame::Lab).expect("valid");
        let traj = solver::solve(&theta0, &params, &config).expect("solve");
        let back = solver::from_moving_frame(&solver::to_moving_frame(&traj));
        let mut worst: f64 = 0.0;
        for i in 0..traj.len() {
            worst = worst
                .max(back.states[i].sub(&traj.states[i]).unwrap().sobolev_norm(0.0) / traj.norms[i]);
        }
        out.push(outcome(
            "solver.frame_round_trip",
            worst <= 1e-12,
            format!("max relative distance {worst:.3e}"),
        ));
    }

    // Mixing functional without shear reduces to its closed form.
    {
        let theta0 = SpectralField::cos_2y(grid);
        let params = FlowParams::new(0.0, 0.0, 1, TranslationLaw::Explicit(0.1)).expect("valid");
        let horizon = 12.0;
        let m = mixing::scan_functional(&theta0, &params, &[horizon], 0.01)
            .expect("scan")
            .pop()
            .expect("one horizon")
            .1;
        let expect = (horizon - 1.0) / horizon * theta0.sobolev_norm(-1.0);
        let err = (m - expect).abs() / expect;
        out.push(outcome(
            "mixing.alpha_zero_closed_form",
            err <= 1e-10,
            format!("relative deviation {err:.3e}"),
        ));
    }

    // Optimal threshold is the minimiser of the scaling balance.
    {
        let d = mixing::optimal_delta(10.0, 0.1, 1).expect("valid");
        let fd = mixing::delta_objective(d, 10.0, 0.1, 1);
        let mut ok = true;
        for _ in 0..50 {
            let probe = rng.gen_range(1e-3..5.0);
            if fd > mixing::delta_objective(probe, 10.0, 0.1, 1) + 1e-12 {
                ok = false;
            }
        }
        out.push(outcome("mixing.optimal_delta", ok, format!("delta = {d:.6}")));
    }

    // Critical sets tile the strip.
    {
        let c = 0.1;
        let cs = mixing::critical_sets(0.1, 0.1, c, 1.0, PI / c, 512).expect("valid");
        let strip = 2.0 * PI * (PI / c - 1.0);
        let gap = (cs.meas_d + cs.meas_e + cs.meas_c - strip).abs() / strip;
        out.push(outcome(
            "mixing.partition_sum",
            gap <= 1e-9,
            format!("relative gap {gap:.3e}"),
        ));
    }

    // Phase-gradient lower bound on the set D.
    {
        let worst = mixing::phase_gradient_bound_check(0.2, 0.1, 20_000, &mut rng).expect("valid");
        out.push(outcome(
            "mixing.phase_gradient_bound",
            worst <= 1.0 + 1e-12,
            format!("worst ratio {worst:.12}"),
        ));
    }

    // Coefficient schedule identities.
    {
        let c = hypo::make_coefficients(0.01, 0.5, 1e-3, 1.0, 1.0).expect("valid");
        let i1 = (c.beta0 * c.beta0 / c.alpha0 - c.gamma0 / 16.0).abs() / (c.gamma0 / 16.0);
        let i2 = (c.beta1 * c.beta1 - c.gamma0 * c.gamma1 / 16.0).abs()
            / (c.gamma0 * c.gamma1 / 16.0);
        out.push(outcome(
            "hypo.coefficient_identities",
            i1 <= 1e-14 && i2 <= 1e-13,
            format!("relative deviations {i1:.3e}, {i2:.3e}"),
        ));
    }

    // Ledger hand values and pointwise identities on random fields.
    {
        let c = hypo::make_coefficients(0.01, 0.5, 1e-3, 1.0, 1.0).expect("valid");
        let one = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let l = hypo::energy_ledger(&one, &c);
        let hand_ok = (l.e0 - 2.0 * PI).abs() < 1e-12
            && (l.e4 - PI).abs() < 1e-12
            && (l.e7 - PI).abs() < 1e-12;
        let mut ids_ok = true;
        let mut coercivity_ok = true;
        for _ in 0..200 {
            let f = random_field(grid, &mut rng);
            let l = hypo::energy_ledger(&f, &c);
            ids_ok &= (l.e4 + l.e7 - l.e0).abs() <= 1e-12 * l.e0;
            ids_ok &= l.e3 * l.e3 <= l.e4 * l.e1 * (1.0 + 1e-12);
            ids_ok &= l.e6 * l.e6 <= l.e4 * l.e7 * (1.0 + 1e-12);
            let check = hypo::coercivity_check(&l, &c);
            coercivity_ok &= check.lower_ok && check.upper_ok;
        }
        out.push(outcome("hypo.ledger_hand_values", hand_ok, String::new()));
        out.push(outcome("hypo.pointwise_identities", ids_ok, "200 random fields".into()));
        out.push(outcome("hypo.coercivity", coercivity_ok, "200 random fields".into()));
    }

    // Exponent constraints across the admissible range and at endpoints.
    {
        let mut interior_ok = true;
        for j in 1..=20i64 {
            let ell = Rational64::new(1, 3)
                + (Rational64::new(3, 4) - Rational64::new(1, 3)) * Rational64::new(j, 21);
            let (p, q) = hypo::exponents_exact(ell);
            interior_ok &= hypo::constraint_audit(ell, p, q).all_pass;
        }
        let mut endpoint_fail = true;
        for ell in [Rational64::new(1, 3), Rational64::new(3, 4)] {
            let (p, q) = hypo::exponents_exact(ell);
            endpoint_fail &= !hypo::constraint_audit(ell, p, q).all_pass;
        }
        out.push(outcome(
            "hypo.constraint_audit",
            interior_ok && endpoint_fail,
            "20 interior points, 2 endpoints".into(),
        ));
    }

    // Spectral-gap hand value.
    {
        let cos_y = SpectralField::from_fn(grid, |y| Complex64::new(y.cos(), 0.0));
        let est = hypo::spectral_gap_estimate(&[cos_y], &[1.0]).expect("valid sigma");
        let err = (est.cs - 4.0 / 7.0).abs();
        out.push(outcome(
            "hypo.spectral_gap_hand_value",
            err < 1e-12,
            format!("deviation {err:.3e}"),
        ));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_with_default_seed() {
        let results = run_all(42);
        assert!(results.len() >= 15);
        for r in &results {
            assert!(r.passed, "check {} failed: {}", r.name, r.detail);
        }
    }

    #[test]
    fn checks_are_deterministic() {
        let a = run_all(7);
        let b = run_all(7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.passed, y.passed);
            assert_eq!(x.detail, y.detail);
        }
    }
}
