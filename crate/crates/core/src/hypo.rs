//! Hypocoercive instrumentation of moving-frame runs: the coefficient
//! schedule, the energy ledger and its functional, the coercivity sandwich,
//! the six energy balances, the decay envelope, the exponent constraint
//! system, and the empirical spectral-gap constant.

use num_complex::Complex64;
use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::params::{FlowParams, TranslationLaw};
use crate::solver::Trajectory;

/// Smallness threshold 64 beta0^{1/2} <= 1/2, i.e. beta0 <= 1/128^2.
pub const BETA0_ERROR_THRESHOLD: f64 = 1.0 / (128.0 * 128.0);

/// p = (1 + 2 ell)/5, q = (3 - 4 ell)/5.
pub fn exponents(ell: f64) -> (f64, f64) {
    ((1.0 + 2.0 * ell) / 5.0, (3.0 - 4.0 * ell) / 5.0)
}

/// Weight schedule of the extended energy functional, together with the
/// derived burn-in time and decay rate.
#[derive(Debug, Clone, Copy)]
pub struct HypoCoefficients {
    pub beta0: f64,
    pub ell: f64,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub varsigma: f64,
    pub varsigma_k: f64,
    pub alpha0: f64,
    pub gamma0: f64,
    pub beta1: f64,
    pub gamma1: f64,
    /// Spectral-gap constant (calibrated empirically).
    pub cs: f64,
    /// lambda_mu = beta0^{5/4} varsigma_k mu^p / (12 Cs).
    pub lambda_mu: f64,
    /// Burn-in time T_mu = mu^{-(1-2p)}.
    pub t_mu: f64,
    /// Set when beta0 exceeds the smallness thresholds under which the
    /// differential inequality is derived; beta0 in (0,1) is still accepted.
    pub exceeds_error_threshold: bool,
    pub exceeds_spectral_threshold: bool,
}

pub fn make_coefficients(
    beta0: f64,
    ell: f64,
    mu: f64,
    varsigma_k: f64,
    cs: f64,
) -> Result<HypoCoefficients> {
    if !(beta0 > 0.0 && beta0 < 1.0) {
        return Err(Error::OutOfRange { name: "beta0", value: beta0, range: "(0, 1)" });
    }
    if !(ell > 1.0 / 3.0 && ell < 3.0 / 4.0) {
        return Err(Error::OutOfRange { name: "ell", value: ell, range: "(1/3, 3/4)" });
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange { name: "mu", value: mu, range: "(0, 1)" });
    }
    if !(cs >= 1.0) {
        return Err(Error::OutOfRange { name: "Cs", value: cs, range: "[1, inf)" });
    }
    let (p, q) = exponents(ell);
    let spectral_threshold = 1.0 / (32.0 * cs).powi(4);
    Ok(HypoCoefficients {
        beta0,
        ell,
        p,
        q,
        mu,
        varsigma: varsigma_k * mu.powf(ell),
        varsigma_k,
        alpha0: beta0.sqrt() * mu.powf(p),
        gamma0: 16.0 * beta0.powf(1.5) / mu.powf(p),
        beta1: beta0 / mu.powf(0.5 * (p + q)),
        gamma1: beta0.sqrt() / mu.powf(q),
        cs,
        lambda_mu: beta0.powf(1.25) * varsigma_k * mu.powf(p) / (12.0 * cs),
        t_mu: mu.powf(-(1.0 - 2.0 * p)),
        exceeds_error_threshold: beta0 > BETA0_ERROR_THRESHOLD,
        exceeds_spectral_threshold: beta0 > spectral_threshold,
    })
}

impl HypoCoefficients {
    /// From a lab configuration under a power-law translation.
    pub fn from_flow(params: &FlowParams, beta0: f64, cs: f64) -> Result<Self> {
        let scaled = params.scaled();
        match params.c_law {
            TranslationLaw::PowerLaw { ell, .. } => {
                make_coefficients(beta0, ell, scaled.mu, scaled.varsigma_k, cs)
            }
            TranslationLaw::Explicit(_) => Err(Error::OutOfRange {
                name: "c_law",
                value: params.speed(),
                range: "power law c = c0 nu^ell",
            }),
        }
    }
}

/// Sampled energies at one scaled time. Index 5 is intentionally absent:
/// the functional is built from E0-E4, E6 and E7 only.
#[derive(Debug, Clone, Copy)]
pub struct EnergyLedger {
    pub tau: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e6: f64,
    pub e7: f64,
    pub phi: f64,
}

/// Re<i f, g> with the inner product conjugate-linear in g.
#[inline]
fn re_i(f: Complex64, g: Complex64) -> f64 {
    -(f * g.conj()).im
}

/// Inner products entering the right-hand sides of the energy balances.
#[derive(Debug, Clone, Copy)]
struct BalanceTerms {
    /// Re<i cos y dtheta, d2theta>
    r3a: f64,
    /// Re<i sin y theta, d2theta>
    r3b: f64,
    /// Re<i sin y theta, dtheta>
    r3c: f64,
    /// ||cos y dtheta||^2
    r4a: f64,
    /// Re<sin y cos y theta, dtheta>
    r4b: f64,
    /// Re<sin y dtheta, cos y dtheta>
    r5a: f64,
    /// ||sin y dtheta||^2
    r6a: f64,
}

fn ledger_with_terms(
    tau: f64,
    state: &SpectralField,
    coeffs: &HypoCoefficients,
) -> (EnergyLedger, BalanceTerms) {
    let grid = state.grid();
    let w = grid.weight();
    let dtheta = state.derivative(1);
    let d2theta = state.derivative(2);

    let mut e = [0.0f64; 8];
    let mut t = BalanceTerms { r3a: 0.0, r3b: 0.0, r3c: 0.0, r4a: 0.0, r4b: 0.0, r5a: 0.0, r6a: 0.0 };

    for (j, y) in grid.nodes().enumerate() {
        let (s, c) = y.sin_cos();
        let th = state.values()[j];
        let d1 = dtheta.values()[j];
        let d2 = d2theta.values()[j];

        e[0] += th.norm_sqr();
        e[1] += d1.norm_sqr();
        e[2] += d2.norm_sqr();
        e[3] += c * re_i(th, d1);
        e[4] += c * c * th.norm_sqr();
        e[6] += s * c * th.norm_sqr();
        e[7] += s * s * th.norm_sqr();

        t.r3a += c * re_i(d1, d2);
        t.r3b += s * re_i(th, d2);
        t.r3c += s * re_i(th, d1);
        t.r4a += c * c * d1.norm_sqr();
        t.r4b += s * c * (th * d1.conj()).re;
        t.r5a += s * c * d1.norm_sqr();
        t.r6a += s * s * d1.norm_sqr();
    }

    for x in &mut e {
        *x *= w;
    }
    t.r3a *= w;
    t.r3b *= w;
    t.r3c *= w;
    t.r4a *= w;
    t.r4b *= w;
    t.r5a *= w;
    t.r6a *= w;

    let phi = 0.5
        * (e[0] + coeffs.alpha0 * e[1] + 2.0 * coeffs.beta0 * e[3] + coeffs.gamma0 * e[4]
            - 2.0 * coeffs.beta1 * e[6]
            + coeffs.gamma1 * e[7]);
    (
        EnergyLedger {
            tau,
            e0: e[0],
            e1: e[1],
            e2: e[2],
            e3: e[3],
            e4: e[4],
            e6: e[6],
            e7: e[7],
            phi,
        },
        t,
    )
}

/// Evaluate the ledger for a single state (tau = 0).
pub fn energy_ledger(state: &SpectralField, coeffs: &HypoCoefficients) -> EnergyLedger {
    ledger_with_terms(0.0, state, coeffs).0
}

/// Ledger per snapshot of a moving-frame trajectory.
pub fn ledger_series(traj: &Trajectory, coeffs: &HypoCoefficients) -> Vec<EnergyLedger> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&tau, s)| ledger_with_terms(tau, s, coeffs).0)
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct CoercivityCheck {
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// (phi - lower) and (upper - phi), relative to the sandwich scale.
    pub lower_margin: f64,
    pub upper_margin: f64,
}

/// Two-sided equivalence of the functional with the weighted nonnegative
/// energies:
/// (1/8)(4 E0 + 3 a0 E1 + 2 g0 E4 + 3 g1 E7) <= Phi
///   <= (1/8)(4 E0 + 5 a0 E1 + 6 g0 E4 + 5 g1 E7).
pub fn coercivity_check(ledger: &EnergyLedger, coeffs: &HypoCoefficients) -> CoercivityCheck {
    let lower = 0.125
        * (4.0 * ledger.e0
            + 3.0 * coeffs.alpha0 * ledger.e1
            + 2.0 * coeffs.gamma0 * ledger.e4
            + 3.0 * coeffs.gamma1 * ledger.e7);
    let upper = 0.125
        * (4.0 * ledger.e0
            + 5.0 * coeffs.alpha0 * ledger.e1
            + 6.0 * coeffs.gamma0 * ledger.e4
            + 5.0 * coeffs.gamma1 * ledger.e7);
    let scale = upper.abs().max(ledger.phi.abs()).max(1e-300);
    CoercivityCheck {
        lower_ok: ledger.phi >= lower - 1e-10 * scale,
        upper_ok: ledger.phi <= upper + 1e-10 * scale,
        lower_margin: (ledger.phi - lower) / scale,
        upper_margin: (upper - ledger.phi) / scale,
    }
}

/// Max relative residuals of the six energy balances along a uniformly
/// sampled moving-frame trajectory. Left sides are centered differences of
/// the ledger series, right sides spectral quadrature at the interior
/// snapshots; both carry O(h^2) + O(dt^2) error.
pub fn identity_residuals(traj: &Trajectory, coeffs: &HypoCoefficients) -> Result<[f64; 6]> {
    let h = traj.snapshot_spacing().ok_or(Error::NonUniformSampling)?;
    if traj.len() < 3 {
        return Err(Error::TrajectoryTooShort(0.0, 2.0 * h));
    }
    let series: Vec<(EnergyLedger, BalanceTerms)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&tau, s)| ledger_with_terms(tau, s, coeffs))
        .collect();

    let mu = coeffs.mu;
    let vs = coeffs.varsigma;
    let sides = |i: usize| -> [(f64, f64); 6] {
        let (prev, _) = &series[i - 1];
        let (next, _) = &series[i + 1];
        let (cur, t) = &series[i];
        let d = |f: fn(&EnergyLedger) -> f64| (f(next) - f(prev)) / (2.0 * h);
        // The profile is sin y: its derivative is cos y and its second
        // derivative is -sin y, which fixes the signs of the mu and
        // transport terms below.
        [
            (0.5 * d(|l| l.e0), -mu * cur.e1),
            (0.5 * d(|l| l.e1), -mu * cur.e2 - cur.e3),
            (d(|l| l.e3), -cur.e4 - 2.0 * mu * t.r3a + mu * t.r3b + vs * t.r3c),
            (0.5 * d(|l| l.e4), -mu * t.r4a + 2.0 * mu * t.r4b + vs * cur.e6),
            (d(|l| l.e6), -vs * cur.e4 + vs * cur.e7 - 4.0 * mu * cur.e6 - 2.0 * mu * t.r5a),
            (0.5 * d(|l| l.e7), -vs * cur.e6 - mu * t.r6a + mu * cur.e4 - mu * cur.e7),
        ]
    };

    // Per-identity scale: the largest |RHS| along the series, floored by
    // the L^2 energy so identities that are quiescent everywhere (e.g. the
    // first balance at mu = 0) stay well defined.
    let e0_scale = series.iter().map(|(l, _)| l.e0).fold(0.0f64, f64::max).max(1e-300);
    let mut scale = [e0_scale; 6];
    for i in 1..series.len() - 1 {
        for (j, (_, rhs)) in sides(i).iter().enumerate() {
            scale[j] = scale[j].max(rhs.abs());
        }
    }
    let mut out = [0.0f64; 6];
    for i in 1..series.len() - 1 {
        for (j, (lhs, rhs)) in sides(i).iter().enumerate() {
            out[j] = out[j].max((lhs - rhs).abs() / (rhs.abs() + scale[j]));
        }
    }
    Ok(out)
}

/// Functional series with the decay diagnostics of the burn-in analysis.
#[derive(Debug, Clone)]
pub struct PhiSeries {
    pub samples: Vec<(f64, f64)>,
    pub t_mu: f64,
    pub lambda_mu: f64,
    /// Phi non-increasing (to 1e-12 relative) for tau >= T_mu.
    pub monotone_after_burn_in: bool,
    /// First scaled time after T_mu at which monotonicity failed.
    pub first_violation: Option<f64>,
    /// Largest r with Phi(tau) <= Phi(T_mu) exp(-r (tau - T_mu)) after T_mu.
    pub envelope_rate: f64,
    /// Log-linear fit of Phi over [T_mu, 3 T_mu].
    pub fitted_rate: Option<f64>,
}

pub fn phi_series(traj: &Trajectory, coeffs: &HypoCoefficients) -> PhiSeries {
    let samples: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&tau, s)| (tau, ledger_with_terms(tau, s, coeffs).0.phi))
        .collect();

    let t_mu = coeffs.t_mu;
    let mut monotone = true;
    let mut first_violation = None;
    let mut prev: Option<f64> = None;
    for &(tau, phi) in samples.iter().filter(|(tau, _)| *tau >= t_mu * (1.0 - 1e-12)) {
        if let Some(p) = prev {
            if phi > p * (1.0 + 1e-12) && monotone {
                monotone = false;
                first_violation = Some(tau);
            }
        }
        prev = Some(phi);
    }

    let anchor = samples
        .iter()
        .find(|(tau, _)| *tau >= t_mu * (1.0 - 1e-12))
        .copied();
    let mut envelope_rate = f64::INFINITY;
    let mut fit_pts: Vec<(f64, f64)> = Vec::new();
    if let Some((tau0, phi0)) = anchor {
        for &(tau, phi) in &samples {
            if tau > tau0 + 1e-12 && phi0 > 0.0 && phi > 0.0 {
                envelope_rate = envelope_rate.min((phi0 / phi).ln() / (tau - tau0));
            }
            if tau >= tau0 && tau <= 3.0 * t_mu && phi > 0.0 {
                fit_pts.push((tau, phi.ln()));
            }
        }
    }
    let fitted_rate = if fit_pts.len() >= 3 {
        let n = fit_pts.len() as f64;
        let mx = fit_pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit_pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = fit_pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = fit_pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    } else {
        None
    };

    PhiSeries {
        samples,
        t_mu,
        lambda_mu: coeffs.lambda_mu,
        monotone_after_burn_in: monotone,
        first_violation,
        envelope_rate,
        fitted_rate,
    }
}

/// Lab-frame decay envelope for ||theta_hat(t)||_2^2 under c = c0 nu^ell:
/// Ced (1 + beta0^{1/2} (alpha|k|/nu)^p)
///   exp(-(beta0^{5/4}/(12 Cs)) c0 (alpha|k|)^{(3 ell - 1)/5} nu^p t - 2 nu k^2 t)
/// times the initial squared norm, with p = (1 + 2 ell)/5.
pub fn decay_envelope(
    t: f64,
    params: &FlowParams,
    beta0: f64,
    cs: f64,
    ced: f64,
    initial_l2_sq: f64,
) -> Result<f64> {
    let (c0, ell) = match params.c_law {
        TranslationLaw::PowerLaw { c0, ell } => (c0, ell),
        TranslationLaw::Explicit(c) => {
            return Err(Error::OutOfRange { name: "c_law", value: c, range: "power law" })
        }
    };
    if !(ell > 1.0 / 3.0 && ell < 3.0 / 4.0) {
        return Err(Error::OutOfRange { name: "ell", value: ell, range: "(1/3, 3/4)" });
    }
    let ak = params.advective_rate();
    let nu = params.nu;
    let (p, _) = exponents(ell);
    let rate = beta0.powf(1.25) / (12.0 * cs) * c0 * ak.powf((3.0 * ell - 1.0) / 5.0) * nu.powf(p);
    let ksq = (params.k as f64) * (params.k as f64);
    let prefactor = ced * (1.0 + beta0.sqrt() * (ak / nu).powf(p));
    Ok(prefactor * (-rate * t - 2.0 * nu * ksq * t).exp() * initial_l2_sq)
}

/// Outcome of one exponent constraint, evaluated in exact rational
/// arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintRow {
    pub name: &'static str,
    pub holds: bool,
    /// Inequality satisfied with equality.
    pub binding: bool,
    /// Slack (>= 0 iff the constraint holds), as a float for reporting.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct ConstraintAudit {
    pub rows: Vec<ConstraintRow>,
    pub all_pass: bool,
}

/// Exact p = (1 + 2 ell)/5 and q = (3 - 4 ell)/5 as rationals.
pub fn exponents_exact(ell: Rational64) -> (Rational64, Rational64) {
    let five = Rational64::from_integer(5);
    (
        (Rational64::from_integer(1) + Rational64::from_integer(2) * ell) / five,
        (Rational64::from_integer(3) - Rational64::from_integer(4) * ell) / five,
    )
}

/// Audit of the exponent constraint system: the six scaling constraints,
/// the ordering constraint, and the three in-proof conditions, evaluated as
/// exact rational comparisons.
pub fn constraint_audit(ell: Rational64, p: Rational64, q: Rational64) -> ConstraintAudit {
    let r = |n: i64| Rational64::from_integer(n);
    let half = Rational64::new(1, 2);

    // (name, lhs, rhs) rows standing for lhs <= rhs.
    let le_rows: Vec<(&'static str, Rational64, Rational64)> = vec![
        ("A", r(2) * ell - p + r(2) * q, r(1)),
        ("B", p, (r(1) - q) * half),
        ("C", (r(1) - q) * half, p),
        ("D", r(3) * p, r(2) * ell + q),
        ("E", r(2), r(2) * ell + p + r(3) * q),
        ("F", r(2) * p, r(1) + q),
        ("C1", (r(2) * ell - p - q) * half, r(2) * (ell - p)),
        ("C2", r(1) - q, (r(2) * ell + p + q) * half),
        ("C3", (r(1) - q) * half, r(1) - p),
    ];

    let mut rows: Vec<ConstraintRow> = le_rows
        .into_iter()
        .map(|(name, lhs, rhs)| {
            let slack = rhs - lhs;
            ConstraintRow {
                name,
                holds: slack >= r(0),
                binding: slack == r(0),
                slack: rational_to_f64(slack),
            }
        })
        .collect();

    // (O): 0 < q < p <= ell < 1, strict except p <= ell.
    let o_holds = q > r(0) && p > q && ell >= p && ell < r(1);
    let o_slack = [q, p - q, ell - p, r(1) - ell].into_iter().min().expect("nonempty");
    rows.push(ConstraintRow {
        name: "O",
        holds: o_holds,
        binding: o_holds && ell == p,
        slack: rational_to_f64(o_slack),
    });

    let all_pass = rows.iter().all(|row| row.holds);
    ConstraintAudit { rows, all_pass }
}

fn rational_to_f64(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub fn audit_csv(audit: &ConstraintAudit, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "constraint,holds,binding,slack")?;
    for row in &audit.rows {
        writeln!(w, "{},{},{},{}", row.name, row.holds, row.binding, row.slack)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct GapEstimate {
    pub cs: f64,
    /// (field, sigma) pairs excluded because sigma E1 + E4 < 1e-14 E0.
    pub excluded: usize,
}

fn gap_energies(field: &SpectralField) -> (f64, f64, f64) {
    let grid = field.grid();
    let w = grid.weight();
    let dtheta = field.derivative(1);
    let (mut e0, mut e1, mut e4) = (0.0, 0.0, 0.0);
    for (j, y) in grid.nodes().enumerate() {
        let c = y.cos();
        e0 += field.values()[j].norm_sqr();
        e1 += dtheta.values()[j].norm_sqr();
        e4 += c * c * field.values()[j].norm_sqr();
    }
    (e0 * w, e1 * w, e4 * w)
}

/// Empirical spectral-gap constant: the largest
/// sigma^{1/2} E0 / (sigma E1 + E4) over the supplied fields and the sigma
/// grid, sigma in (0, 1].
pub fn spectral_gap_estimate(fields: &[SpectralField], sigma_grid: &[f64]) -> Result<GapEstimate> {
    let mut cs: f64 = 0.0;
    let mut excluded = 0usize;
    for field in fields {
        let (e0, e1, e4) = gap_energies(field);
        if e0 == 0.0 {
            excluded += sigma_grid.len();
            continue;
        }
        for &sigma in sigma_grid {
            if !(sigma > 0.0 && sigma <= 1.0) {
                return Err(Error::OutOfRange { name: "sigma", value: sigma, range: "(0, 1]" });
            }
            let denom = sigma * e1 + e4;
            if denom < 1e-14 * e0 {
                excluded += 1;
                continue;
            }
            cs = cs.max(sigma.sqrt() * e0 / denom);
        }
    }
    Ok(GapEstimate { cs, excluded })
}

/// Deterministic probe family for the spectral-gap calibration: low modes,
/// cosine profiles, bumps concentrated at the critical point y = pi/2, and
/// seeded random trigonometric polynomials.
pub fn standard_gap_family(grid: crate::grid::Grid, seed: u64) -> Vec<SpectralField> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut fields = Vec::new();
    fields.push(SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0)));
    for m in 1..=8i64 {
        fields.push(SpectralField::single_mode(grid, m));
        fields.push(SpectralField::from_fn(grid, |y| Complex64::new((m as f64 * y).cos(), 0.0)));
    }
    for width in [0.05, 0.1, 0.2, 0.4] {
        fields.push(SpectralField::from_fn(grid, |y| {
            let d = y - std::f64::consts::FRAC_PI_2;
            Complex64::new((-d * d / (2.0 * width * width)).exp(), 0.0)
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..30 {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for m in -12i64..=12 {
            if let Some(i) = grid.index_of_mode(m) {
                coeffs[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        fields.push(SpectralField::from_coeffs(grid, coeffs).expect("same grid"));
    }
    fields
}

/// Calibrated spectral-gap constant over the standard family, clamped to
/// the >= 1 range the rate formula expects.
pub fn calibrate_cs(grid: crate::grid::Grid, seed: u64) -> f64 {
    let sigma_grid: Vec<f64> =
        (0..16).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 15.0)).collect();
    let fields = standard_gap_family(grid, seed);
    spectral_gap_estimate(&fields, &sigma_grid)
        .expect("sigma grid is valid")
        .cs
        .max(1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct BurnInCheck {
    /// int_0^{T_mu} E1 <= E0(0)/(2 mu), up to 1e-6 relative slack.
    pub integral_ok: bool,
    /// min_snapshot E1 <= (1/2) mu^{-2p} E0(0), up to the same slack.
    pub pointwise_ok: bool,
    pub integral: f64,
    pub integral_budget: f64,
    pub min_e1: f64,
    pub pointwise_budget: f64,
}

pub fn burn_in_check(traj: &Trajectory, coeffs: &HypoCoefficients) -> Result<BurnInCheck> {
    let t_mu = coeffs.t_mu;
    if traj.times.last().copied().unwrap_or(0.0) < t_mu * (1.0 - 1e-9) {
        return Err(Error::TrajectoryTooShort(0.0, t_mu));
    }
    let series = ledger_series(traj, coeffs);
    let mut integral = 0.0;
    let mut min_e1 = f64::INFINITY;
    for i in 0..series.len() - 1 {
        let (t0, t1) = (series[i].tau, series[i + 1].tau);
        if t0 >= t_mu {
            break;
        }
        min_e1 = min_e1.min(series[i].e1);
        if t1 <= t_mu {
            integral += 0.5 * (series[i].e1 + series[i + 1].e1) * (t1 - t0);
        } else {
            // Partial last interval: interpolate E1 at T_mu.
            let frac = (t_mu - t0) / (t1 - t0);
            let e1_at = series[i].e1 + frac * (series[i + 1].e1 - series[i].e1);
            integral += 0.5 * (series[i].e1 + e1_at) * (t_mu - t0);
            break;
        }
    }
    for l in &series {
        if l.tau <= t_mu * (1.0 + 1e-9) {
            min_e1 = min_e1.min(l.e1);
        }
    }
    let e00 = series[0].e0;
    let integral_budget = e00 / (2.0 * coeffs.mu);
    let pointwise_budget = 0.5 * coeffs.mu.powf(-2.0 * coeffs.p) * e00;
    Ok(BurnInCheck {
        integral_ok: integral <= integral_budget * (1.0 + 1e-6),
        pointwise_ok: min_e1 <= pointwise_budget * (1.0 + 1e-6),
        integral,
        integral_budget,
        min_e1,
        pointwise_budget,
    })
}

/// Ledger CSV with the Phi envelope anchored at the burn-in time.
pub fn ledger_csv(
    series: &[EnergyLedger],
    coeffs: &HypoCoefficients,
    mut w: impl std::io::Write,
) -> Result<()> {
    writeln!(w, "tau,E0,E1,E2,E3,E4,E6,E7,Phi,envelope")?;
    let anchor = series
        .iter()
        .find(|l| l.tau >= coeffs.t_mu * (1.0 - 1e-12))
        .map(|l| (l.tau, l.phi));
    for l in series {
        let env = match anchor {
            Some((tau0, phi0)) => phi0 * (-coeffs.lambda_mu * (l.tau - tau0)).exp(),
            None => f64::NAN,
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            l.tau, l.e0, l.e1, l.e2, l.e3, l.e4, l.e6, l.e7, l.phi, env
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::params::TranslationLaw;
    use crate::solver::{solve, Frame, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn coeffs_for(beta0: f64, ell: f64, mu: f64) -> HypoCoefficients {
        make_coefficients(beta0, ell, mu, 1.0, 1.0).unwrap()
    }

    fn synthetic_diffusion_trajectory(
        theta0: &SpectralField,
        mu: f64,
        dt: f64,
        steps: usize,
    ) -> Trajectory {
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        let states: Vec<SpectralField> = times
            .iter()
            .map(|&tau| crate::solver::heat_solution(theta0, 0, mu, tau))
            .collect();
        let norms: Vec<f64> = states.iter().map(|s| s.sobolev_norm(0.0)).collect();
        let params = FlowParams::new(1.0, mu, 1, TranslationLaw::Explicit(0.0)).unwrap();
        Trajectory {
            times,
            states,
            norms,
            params,
            scaled: params.scaled(),
            frame: Frame::Moving,
            tail_warning: None,
            max_tail_fraction: 0.0,
        }
    }

    #[test]
    fn coefficient_closed_forms() {
        let c = coeffs_for(0.01, 0.5, 1e-3);
        assert_eq!(c.p, 0.4);
        assert!((c.q - 0.2).abs() < 1e-15);
        assert!((c.alpha0 - 6.309573444801932e-3).abs() < 1e-15);
        assert!((c.gamma0 - 0.2535829107937782).abs() < 1e-13);
        assert!((c.beta1 - 7.943282347242818e-2).abs() < 1e-14);
        assert!((c.gamma1 - 0.39810717055349726).abs() < 1e-13);
        assert!((c.t_mu - 3.9810717055349714).abs() < 1e-12);

        // Independent recomputation through logs.
        let alt_alpha0 = (0.5 * 0.01f64.ln() + 0.4 * 1e-3f64.ln()).exp();
        assert!((c.alpha0 - alt_alpha0).abs() <= 1e-15);
    }

    #[test]
    fn coefficient_identities_hold_to_machine_precision() {
        for (beta0, ell, mu) in [(0.01, 0.5, 1e-3), (1e-4, 0.4, 1e-4), (0.3, 0.7, 0.05)] {
            let c = coeffs_for(beta0, ell, mu);
            let lhs = c.beta0 * c.beta0 / c.alpha0;
            let rhs = c.gamma0 / 16.0;
            assert!((lhs - rhs).abs() <= 1e-14 * rhs, "beta0^2/alpha0 vs gamma0/16");
            let lhs2 = c.beta1 * c.beta1;
            let rhs2 = c.gamma0 * c.gamma1 / 16.0;
            assert!((lhs2 - rhs2).abs() <= 1e-13 * rhs2, "beta1^2 vs gamma0 gamma1/16");
            assert!(c.q < c.p && c.p <= c.ell);
            assert!((4.0 * c.ell + 5.0 * c.q - 3.0).abs() < 1e-14);
            assert!((c.p - (1.0 - c.q) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_endpoint_ell() {
        assert!(make_coefficients(0.01, 1.0 / 3.0, 1e-3, 1.0, 1.0).is_err());
        assert!(make_coefficients(0.01, 0.75, 1e-3, 1.0, 1.0).is_err());
        assert!(make_coefficients(0.01, 0.9, 1e-3, 1.0, 1.0).is_err());
    }

    #[test]
    fn smallness_warnings_follow_thresholds() {
        let ok = make_coefficients(5e-5, 0.5, 1e-3, 1.0, 1.0).unwrap();
        assert!(!ok.exceeds_error_threshold);
        let warn = make_coefficients(1e-3, 0.5, 1e-3, 1.0, 1.0).unwrap();
        assert!(warn.exceeds_error_threshold);
        // The spectral threshold 1/(32 Cs)^4 is far below any practical
        // beta0 once Cs > 1.
        let warn2 = make_coefficients(1e-4, 0.5, 1e-3, 1.0, 2.0).unwrap();
        assert!(warn2.exceeds_spectral_threshold);
    }

    #[test]
    fn ledger_constant_field() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(0.01, 0.5, 1e-3);
        let one = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let l = energy_ledger(&one, &c);
        assert!((l.e0 - 2.0 * PI).abs() < 1e-12);
        assert!(l.e1.abs() < 1e-18 && l.e2.abs() < 1e-16);
        assert!(l.e3.abs() < 1e-13 && l.e6.abs() < 1e-13);
        assert!((l.e4 - PI).abs() < 1e-12);
        assert!((l.e7 - PI).abs() < 1e-12);
        let expect = 0.5 * (2.0 * PI + (c.gamma0 + c.gamma1) * PI);
        assert!((l.phi - expect).abs() < 1e-12);
    }

    #[test]
    fn ledger_single_mode() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(0.01, 0.5, 1e-3);
        let l = energy_ledger(&SpectralField::single_mode(grid, 1), &c);
        for (got, expect) in [
            (l.e0, 2.0 * PI),
            (l.e1, 2.0 * PI),
            (l.e2, 2.0 * PI),
            (l.e4, PI),
            (l.e7, PI),
        ] {
            assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        }
        assert!(l.e3.abs() < 1e-13);
        assert!(l.e6.abs() < 1e-13);
    }

    #[test]
    fn pointwise_pythagoras_and_cauchy_schwarz() {
        let grid = Grid::new(128).unwrap();
        let c = coeffs_for(0.01, 0.5, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let values: Vec<Complex64> = (0..grid.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = SpectralField::from_values(grid, values).unwrap();
            let l = energy_ledger(&f, &c);
            assert!((l.e4 + l.e7 - l.e0).abs() <= 1e-12 * l.e0);
            assert!(l.e3 * l.e3 <= l.e4 * l.e1 * (1.0 + 1e-12));
            assert!(l.e6 * l.e6 <= l.e4 * l.e7 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coercivity_on_probes() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(0.01, 0.5, 1e-3);

        let one = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let check = coercivity_check(&energy_ledger(&one, &c), &c);
        assert!(check.lower_ok && check.upper_ok);
        assert!(check.lower_margin > 0.0 && check.upper_margin > 0.0);

        // Probe stressing the E3 cross term (two adjacent modes).
        let probe = SpectralField::from_fn(grid, |y| {
            Complex64::from_polar(1.0, y) + Complex64::from_polar(1.0, 2.0 * y)
        });
        let check = coercivity_check(&energy_ledger(&probe, &c), &c);
        assert!(check.lower_ok && check.upper_ok);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let values: Vec<Complex64> = (0..grid.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let f = SpectralField::from_values(grid, values).unwrap();
            let check = coercivity_check(&energy_ledger(&f, &c), &c);
            assert!(check.lower_ok && check.upper_ok);
        }
    }

    #[test]
    fn identity_one_is_exact_without_diffusion() {
        // mu = 0, varsigma = 0: E0 is conserved and identity 1 is exact.
        let grid = Grid::new(128).unwrap();
        let params = FlowParams::new(1.0, 0.0, 1, TranslationLaw::Explicit(0.0)).unwrap();
        let config = SolverConfig::new(0.01, 2.0, 1, Frame::Moving).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let traj = solve(&theta0, &params, &config).unwrap();
        let c = HypoCoefficients { mu: 0.0, varsigma: 0.0, ..coeffs_for(0.01, 0.5, 1e-3) };
        let res = identity_residuals(&traj, &c).unwrap();
        assert!(res[0] <= 1e-10, "identity 1 residual {}", res[0]);
    }

    #[test]
    fn identity_residuals_small_on_reference_run() {
        let grid = Grid::new(128).unwrap();
        let params =
            FlowParams::new(1.0, 1e-3, 1, TranslationLaw::PowerLaw { c0: 1.0, ell: 0.5 }).unwrap();
        let config = SolverConfig::new(0.005, 4.0, 1, Frame::Moving).unwrap();
        let theta0 = SpectralField::cos_2y(grid);
        let traj = solve(&theta0, &params, &config).unwrap();
        let c = HypoCoefficients::from_flow(&params, 0.01, 1.0).unwrap();
        let res = identity_residuals(&traj, &c).unwrap();
        for (i, r) in res.iter().enumerate() {
            assert!(*r <= 1e-3, "identity {} residual {}", i + 1, r);
        }
    }

    #[test]
    fn phi_matches_ledger_at_origin_and_decays_for_pure_diffusion() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(1e-4, 0.5, 1e-2);
        let theta0 = SpectralField::cos_2y(grid);
        let traj = synthetic_diffusion_trajectory(&theta0, c.mu, 0.05, 200);

        let series = phi_series(&traj, &c);
        assert!((series.samples[0].1 - energy_ledger(&theta0, &c).phi).abs() < 1e-12);
        for w in series.samples.windows(2) {
            assert!(w[1].1 < w[0].1, "Phi must strictly decrease under pure diffusion");
        }
        assert!(series.monotone_after_burn_in);
        assert!(series.first_violation.is_none());
        assert!(series.envelope_rate > 0.0);
    }

    #[test]
    fn burn_in_single_mode_heat_is_tight() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(0.01, 0.5, 0.01);
        let theta0 = SpectralField::single_mode(grid, 1);
        let traj = synthetic_diffusion_trajectory(&theta0, c.mu, 0.01, 400);
        let check = burn_in_check(&traj, &c).unwrap();
        assert!(check.integral_ok && check.pointwise_ok);
        // For single-mode heat the infinite-horizon integral saturates the
        // budget; truncation at T_mu accounts for the remaining gap.
        let expected = check.integral_budget * (1.0 - (-2.0 * c.mu * c.t_mu).exp());
        assert!((check.integral - expected).abs() <= 1e-3 * expected);
    }

    #[test]
    fn burn_in_trivial_for_constant_datum() {
        let grid = Grid::new(64).unwrap();
        let c = coeffs_for(0.01, 0.5, 0.01);
        let one = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let traj = synthetic_diffusion_trajectory(&one, c.mu, 0.05, 100);
        let check = burn_in_check(&traj, &c).unwrap();
        assert!(check.integral_ok && check.pointwise_ok);
        assert!(check.min_e1 < 1e-18);
    }

    #[test]
    fn constraint_audit_interior_and_endpoints() {
        let ell = Rational64::new(1, 2);
        let (p, q) = exponents_exact(ell);
        assert_eq!(p, Rational64::new(2, 5));
        assert_eq!(q, Rational64::new(1, 5));
        let audit = constraint_audit(ell, p, q);
        assert!(audit.all_pass);
        let by_name = |n: &str| audit.rows.iter().find(|r| r.name == n).unwrap().clone();
        assert!(by_name("A").binding, "(A) binds: 4 ell + 5 q = 3");
        assert!(by_name("D").binding, "(D) binds: 4 ell + 5 q = 3");
        assert!(!by_name("F").binding);
        assert!(!by_name("O").binding);

        // Endpoints fail through the ordering constraint only.
        for ell in [Rational64::new(1, 3), Rational64::new(3, 4)] {
            let (p, q) = exponents_exact(ell);
            let audit = constraint_audit(ell, p, q);
            assert!(!audit.all_pass);
            assert!(!audit.rows.iter().find(|r| r.name == "O").unwrap().holds);
            for r in &audit.rows {
                if r.name != "O" {
                    assert!(r.holds, "only (O) may fail at the endpoints, got {}", r.name);
                }
            }
        }
    }

    #[test]
    fn constraint_audit_dense_interior_grid() {
        for j in 1..=50i64 {
            let ell = Rational64::new(1, 3)
                + (Rational64::new(3, 4) - Rational64::new(1, 3)) * Rational64::new(j, 51);
            let (p, q) = exponents_exact(ell);
            assert!(constraint_audit(ell, p, q).all_pass, "ell = {ell}");
        }
    }

    #[test]
    fn spectral_gap_hand_values() {
        let grid = Grid::new(128).unwrap();
        let cos_y = SpectralField::from_fn(grid, |y| Complex64::new(y.cos(), 0.0));
        let est = spectral_gap_estimate(&[cos_y], &[1.0]).unwrap();
        assert!((est.cs - 4.0 / 7.0).abs() < 1e-12);

        let one = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        for sigma in [0.25, 1.0] {
            let est = spectral_gap_estimate(&[one.clone()], &[sigma]).unwrap();
            assert!((est.cs - 2.0 * sigma.sqrt()).abs() < 1e-12);
        }

        // Bump at the critical point: the ratio grows but stays bounded.
        let bump = SpectralField::from_fn(grid, |y| {
            let d = y - std::f64::consts::FRAC_PI_2;
            Complex64::new((-d * d / (2.0 * 0.1 * 0.1)).exp(), 0.0)
        });
        let sigmas: Vec<f64> =
            (0..16).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 15.0)).collect();
        let est = spectral_gap_estimate(&[bump], &sigmas).unwrap();
        assert!(est.cs > 4.0 / 7.0 && est.cs < 10.0, "cs = {}", est.cs);
    }

    #[test]
    fn calibrated_cs_is_order_one() {
        let grid = Grid::new(128).unwrap();
        let cs = calibrate_cs(grid, 42);
        assert!((1.0..10.0).contains(&cs), "cs = {cs}");
    }

    #[test]
    fn envelope_initial_time_and_exponents() {
        let params =
            FlowParams::new(1.0, 1e-4, 1, TranslationLaw::PowerLaw { c0: 1.0, ell: 0.5 }).unwrap();
        let l2sq = 2.0 * PI;
        let v = decay_envelope(0.0, &params, 1e-4, 1.0, 1.0, l2sq).unwrap();
        assert!(v >= l2sq);

        // The nu-exponent of the decay rate interpolates 1/3 .. 1/2.
        let (p_lo, _) = exponents(1.0 / 3.0);
        let (p_hi, _) = exponents(0.75);
        assert!((p_lo - 1.0 / 3.0).abs() < 1e-12);
        assert!((p_hi - 0.5).abs() < 1e-12);

        // At fixed t the log-slope of the rate in nu equals p.
        let beta0 = 1e-2;
        let rate_of = |nu: f64| {
            let p = FlowParams::new(1.0, nu, 1, TranslationLaw::PowerLaw { c0: 1.0, ell: 0.5 })
                .unwrap();
            let e1 = decay_envelope(1.0, &p, beta0, 1.0, 1.0, 1.0).unwrap();
            let e0 = decay_envelope(0.0, &p, beta0, 1.0, 1.0, 1.0).unwrap();
            -(e1 / e0).ln() - 2.0 * nu
        };
        let slope = (rate_of(1e-3).ln() - rate_of(1e-5).ln()) / (1e-3f64.ln() - 1e-5f64.ln());
        assert!((slope - 0.4).abs() < 1e-6, "slope {slope}");

        // Explicit translation law is rejected.
        let bad = FlowParams::new(1.0, 1e-4, 1, TranslationLaw::Explicit(0.1)).unwrap();
        assert!(decay_envelope(1.0, &bad, beta0, 1.0, 1.0, 1.0).is_err());
    }
}
