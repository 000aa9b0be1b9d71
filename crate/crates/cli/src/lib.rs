//! Command-line front end: config parsing with flag-over-file precedence,
//! subcommand dispatch, CSV/report emission, and the consolidated check
//! suite. Exit codes: 0 all asserted checks passed, 1 a check failed,
//! 2 usage or configuration error.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use driftshear::experiments::{self, InitialDatum, LargeCSettings, SweepSettings};
use driftshear::hypo;
use driftshear::mixing;
use driftshear::solver::{self, Frame, SolverConfig};
use driftshear::{FlowParams, Grid, TranslationLaw};

use config::{parse_f64_list, require_all, FileConfig, ResolvedConfig};

#[derive(Parser, Debug)]
#[command(
    name = "driftshear",
    version,
    about = "Pseudospectral solver and verification harness for advection-diffusion with a translating sinusoidal shear"
)]
pub struct Cli {
    /// Flat TOML config file; flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts (created if absent).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for batch drivers (default: logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one configuration and export the norm trajectory.
    Simulate(SimulateArgs),
    /// Time-averaged mixing functional, scaling bound, and critical sets.
    Mixing(MixingArgs),
    /// Moving-frame run instrumented with the energy machinery.
    Hypo(HypoArgs),
    /// Dissipation-time exponent sweep (power law or stationary control).
    Sweep(SweepArgs),
    /// Fast-translation comparison against the heat flow.
    Largec(LargecArgs),
    /// Inviscid snapshot sequence at t = 0, pi/2c, pi/c, 2pi/c.
    Snapshots(SnapshotsArgs),
    /// Consolidated core/solver/mixing/hypo invariant suite.
    Check,
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<i32>,
    /// Explicit translation speed (conflicts with --c0/--ell).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// lab | moving
    #[arg(long)]
    pub frame: Option<String>,
    /// cos2y | mode:M
    #[arg(long)]
    pub theta0: Option<String>,
    /// Dump every j-th stored field as a binary file (0 = none).
    #[arg(long)]
    pub dump_fields: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct MixingArgs {
    /// Validation speeds, comma separated.
    #[arg(long)]
    pub c_list: Option<String>,
    /// Calibration speeds (disjoint from the validation list).
    #[arg(long)]
    pub cal_c_list: Option<String>,
    /// Horizons per speed.
    #[arg(long)]
    pub horizons: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta0: Option<String>,
    /// Thresholds for the critical-set table, comma separated.
    #[arg(long)]
    pub delta_list: Option<String>,
    #[arg(long)]
    pub quad_n: Option<usize>,
    /// Monte-Carlo samples for the phase-gradient bound.
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct HypoArgs {
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Scaled-time horizon (default 3 T_mu).
    #[arg(long)]
    pub tau_end: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Spectral-gap constant override (default: calibrated).
    #[arg(long)]
    pub cs: Option<f64>,
    #[arg(long)]
    pub theta0: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub ell_list: Option<String>,
    #[arg(long)]
    pub nu_min: Option<f64>,
    #[arg(long)]
    pub nu_max: Option<f64>,
    #[arg(long)]
    pub nu_count: Option<usize>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub theta0: Option<String>,
    /// Run the c = 0 control instead of the power law.
    #[arg(long)]
    pub stationary: bool,
}

#[derive(Args, Debug, Default)]
pub struct LargecArgs {
    #[arg(long)]
    pub c_list: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub t_star: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SnapshotsArgs {
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub k: Option<i32>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta0: Option<String>,
}

fn parse_frame(s: &str) -> Result<Frame> {
    match s {
        "lab" => Ok(Frame::Lab),
        "moving" => Ok(Frame::Moving),
        other => bail!("frame must be `lab` or `moving`, got `{other}`"),
    }
}

fn parse_theta0(s: &str) -> Result<InitialDatum> {
    if s == "cos2y" {
        return Ok(InitialDatum::Cos2y);
    }
    if let Some(m) = s.strip_prefix("mode:") {
        let m: i64 = m.parse().map_err(|_| anyhow!("bad mode in theta0 `{s}`"))?;
        return Ok(InitialDatum::SingleMode(m));
    }
    bail!("theta0 must be `cos2y` or `mode:M`, got `{s}`")
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn finish(dir: &Path, resolved: &ResolvedConfig, summary: &serde_json::Value) -> Result<()> {
    write_artifact(dir, "resolved.toml", resolved.to_toml().as_bytes())?;
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    write_artifact(dir, "summary.json", text.as_bytes())?;
    Ok(())
}

/// Entry point; Ok(true) when every asserted check passed.
pub fn run(cli: Cli) -> Result<bool> {
    if let Some(workers) = cli.workers {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let file = load_file_config(&cli.config)?;
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))?;

    match &cli.command {
        Command::Simulate(args) => simulate(&cli, &file, args),
        Command::Mixing(args) => mixing_cmd(&cli, &file, args),
        Command::Hypo(args) => hypo_cmd(&cli, &file, args),
        Command::Sweep(args) => sweep_cmd(&cli, &file, args),
        Command::Largec(args) => largec_cmd(&cli, &file, args),
        Command::Snapshots(args) => snapshots_cmd(&cli, &file, args),
        Command::Check => check_cmd(&cli),
    }
}

fn simulate(cli: &Cli, file: &FileConfig, args: &SimulateArgs) -> Result<bool> {
    file.reject_unknown_keys(&[
        "nu", "alpha", "k", "c", "c0", "ell", "n", "dt", "t_end", "stride", "frame", "theta0",
        "dump_fields",
    ])?;

    let nu = args.nu.or(file.f64("nu")?);
    let t_end = args.t_end.or(file.f64("t_end")?);
    let c = args.c.or(file.f64("c")?);
    let c0 = args.c0.or(file.f64("c0")?);
    let ell = args.ell.or(file.f64("ell")?);

    let mut missing = Vec::new();
    if nu.is_none() {
        missing.push("nu");
    }
    if t_end.is_none() {
        missing.push("t_end");
    }
    if c.is_none() && (c0.is_none() || ell.is_none()) {
        missing.push("c (or c0 and ell)");
    }
    require_all(&missing)?;
    let (nu, t_end) = (nu.unwrap(), t_end.unwrap());

    let c_law = match (c, c0, ell) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            bail!("give either c or the pair (c0, ell), not both")
        }
        (Some(c), None, None) => TranslationLaw::Explicit(c),
        (None, Some(c0), Some(ell)) => TranslationLaw::PowerLaw { c0, ell },
        _ => unreachable!("guarded by require_all"),
    };

    let alpha = args.alpha.or(file.f64("alpha")?).unwrap_or(1.0);
    let k = args.k.or(file.i32("k")?).unwrap_or(1);
    let n = args.n.or(file.usize("n")?).unwrap_or(Grid::DEFAULT_N);
    let frame = parse_frame(
        &args.frame.clone().or(file.string("frame")?).unwrap_or_else(|| "lab".into()),
    )?;
    let datum = parse_theta0(
        &args.theta0.clone().or(file.string("theta0")?).unwrap_or_else(|| "cos2y".into()),
    )?;
    let dump_fields = args.dump_fields.or(file.usize("dump_fields")?).unwrap_or(0);

    let params = FlowParams::new(alpha, nu, k, c_law).context("invalid flow parameters")?;
    let dt = args.dt.or(file.f64("dt")?).unwrap_or_else(|| solver::default_dt(&params));
    let auto = SolverConfig::auto(&params, t_end, frame)?;
    let stride = args.stride.or(file.usize("stride")?).unwrap_or(auto.snapshot_stride);
    let config = SolverConfig::new(dt, t_end, stride, frame)?;

    let grid = Grid::new(n)?;
    let theta0 = datum.build(grid);
    let traj = solver::solve(&theta0, &params, &config)?;

    let mut csv = Vec::new();
    traj.export_csv(&mut csv)?;
    write_artifact(&cli.out, "trajectory.csv", &csv)?;

    if dump_fields > 0 {
        let dir = cli.out.join("fields");
        fs::create_dir_all(&dir)?;
        let mut index = String::new();
        for (i, state) in traj.states.iter().enumerate().step_by(dump_fields) {
            let name = format!("field_{i:06}.bin");
            let mut bytes = Vec::new();
            solver::write_field_binary(state, &mut bytes)?;
            fs::write(dir.join(&name), bytes)?;
            index.push_str(&format!("{name} t={}\n", traj.times[i]));
        }
        fs::write(dir.join("index.txt"), index)?;
    }

    let mut resolved = ResolvedConfig::default();
    resolved.put("nu", nu);
    resolved.put("alpha", alpha);
    resolved.put("k", k);
    match c_law {
        TranslationLaw::Explicit(c) => resolved.put("c", c),
        TranslationLaw::PowerLaw { c0, ell } => {
            resolved.put("c0", c0);
            resolved.put("ell", ell);
        }
    }
    resolved.put("n", n);
    resolved.put("dt", dt);
    resolved.put("t_end", t_end);
    resolved.put("stride", stride);
    resolved.put("frame", format!("\"{}\"", if frame == Frame::Lab { "lab" } else { "moving" }));
    resolved.put("seed", cli.seed);

    let summary = json!({
        "command": "simulate",
        "snapshots": traj.len(),
        "final_time": traj.times.last(),
        "initial_l2": traj.norms.first(),
        "final_l2": traj.norms.last(),
        "resolved_speed": params.speed(),
        "tail_ok": traj.tail_warning.is_none(),
        "max_tail_fraction": traj.max_tail_fraction,
        "pass": traj.tail_warning.is_none(),
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(traj.tail_warning.is_none())
}

fn mixing_cmd(cli: &Cli, file: &FileConfig, args: &MixingArgs) -> Result<bool> {
    file.reject_unknown_keys(&[
        "c_list", "cal_c_list", "horizons", "alpha", "k", "n", "theta0", "delta_list", "quad_n",
        "mc_samples",
    ])?;

    let c_list = match &args.c_list {
        Some(s) => parse_f64_list(s)?,
        None => file.f64_list("c_list")?.unwrap_or_else(|| vec![0.02, 0.05, 0.1]),
    };
    let cal_list = match &args.cal_c_list {
        Some(s) => parse_f64_list(s)?,
        None => file.f64_list("cal_c_list")?.unwrap_or_else(|| vec![0.015, 0.03, 0.06, 0.12]),
    };
    let horizons = args.horizons.or(file.usize("horizons")?).unwrap_or(12);
    let alpha = args.alpha.or(file.f64("alpha")?).unwrap_or(1.0);
    let k = args.k.or(file.i32("k")?).unwrap_or(1);
    let n = args.n.or(file.usize("n")?).unwrap_or(Grid::DEFAULT_N);
    let datum = parse_theta0(
        &args.theta0.clone().or(file.string("theta0")?).unwrap_or_else(|| "cos2y".into()),
    )?;
    let delta_list = match &args.delta_list {
        Some(s) => parse_f64_list(s)?,
        None => file.f64_list("delta_list")?.unwrap_or_else(|| vec![0.05, 0.1, 0.2]),
    };
    let quad_n = args.quad_n.or(file.usize("quad_n")?).unwrap_or(2048);
    let mc_samples = args.mc_samples.or(file.usize("mc_samples")?).unwrap_or(100_000);

    let grid = Grid::new(n)?;
    let theta0 = datum.build(grid);
    let big_c = mixing::calibrate_bound_constant(&theta0, alpha, k, &cal_list, horizons.max(8))?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut bound_ok = true;
    for &c in &c_list {
        let reports = mixing::mixing_reports(&theta0, alpha, k, c, horizons, big_c)?;
        let pts: Vec<(f64, f64)> = reports
            .iter()
            .filter(|r| r.t_horizon >= 4.0)
            .map(|r| (r.t_horizon, r.functional_value))
            .collect();
        let slope = experiments::fit_exponent(&pts)?.slope;
        slopes.push(json!({ "c": c, "slope": slope, "slope_ok": slope <= -0.75 }));
        for r in &reports {
            bound_ok &= r.functional_value <= r.bound_value;
        }
        rows.extend(reports);
    }
    let slope_ok = slopes.iter().all(|s| s["slope_ok"].as_bool().unwrap_or(false));

    let mut csv = Vec::new();
    mixing::reports_csv(&rows, &mut csv)?;
    write_artifact(&cli.out, "mixing.csv", &csv)?;

    // Critical-set measures at the first validation speed over the full
    // window, plus the phase-gradient bound by seeded Monte Carlo.
    let c_ref = c_list.first().copied().unwrap_or(0.1);
    let t_max = std::f64::consts::PI / c_ref;
    let mut cs_rows = Vec::new();
    for &d in &delta_list {
        cs_rows.push(mixing::critical_sets(d, d, c_ref, 1.0, t_max, quad_n)?);
    }
    let mut csv = Vec::new();
    mixing::critical_sets_csv(&cs_rows, &mut csv)?;
    write_artifact(&cli.out, "critical_sets.csv", &csv)?;

    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cli.seed);
    let worst_ratio =
        mixing::phase_gradient_bound_check(delta_list[0], c_ref, mc_samples, &mut rng)?;
    let gradient_ok = worst_ratio <= 1.0 + 1e-12;

    let mut resolved = ResolvedConfig::default();
    resolved.put_list("c_list", &c_list);
    resolved.put_list("cal_c_list", &cal_list);
    resolved.put("horizons", horizons);
    resolved.put("alpha", alpha);
    resolved.put("k", k);
    resolved.put("n", n);
    resolved.put_list("delta_list", &delta_list);
    resolved.put("quad_n", quad_n);
    resolved.put("mc_samples", mc_samples);
    resolved.put("seed", cli.seed);

    let pass = bound_ok && slope_ok && gradient_ok;
    let summary = json!({
        "command": "mixing",
        "calibrated_constant": big_c,
        "slopes": slopes,
        "bound_ok": bound_ok,
        "phase_gradient_worst_ratio": worst_ratio,
        "phase_gradient_ok": gradient_ok,
        "pass": pass,
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

fn hypo_cmd(cli: &Cli, file: &FileConfig, args: &HypoArgs) -> Result<bool> {
    file.reject_unknown_keys(&[
        "nu", "c0", "ell", "alpha", "k", "beta0", "dt", "tau_end", "stride", "n", "cs", "theta0",
    ])?;

    let nu = args.nu.or(file.f64("nu")?).unwrap_or(1e-4);
    let c0 = args.c0.or(file.f64("c0")?).unwrap_or(1.0);
    let ell = args.ell.or(file.f64("ell")?).unwrap_or(0.5);
    let alpha = args.alpha.or(file.f64("alpha")?).unwrap_or(1.0);
    let k = args.k.or(file.i32("k")?).unwrap_or(1);
    let beta0 = args.beta0.or(file.f64("beta0")?).unwrap_or(1e-4);
    let n = args.n.or(file.usize("n")?).unwrap_or(Grid::DEFAULT_N);
    let stride = args.stride.or(file.usize("stride")?).unwrap_or(2);
    let datum = parse_theta0(
        &args.theta0.clone().or(file.string("theta0")?).unwrap_or_else(|| "cos2y".into()),
    )?;

    let grid = Grid::new(n)?;
    let cs = match args.cs.or(file.f64("cs")?) {
        Some(cs) => cs,
        None => hypo::calibrate_cs(grid, cli.seed),
    };

    let params = FlowParams::new(alpha, nu, k, TranslationLaw::PowerLaw { c0, ell })?;
    let coeffs = hypo::HypoCoefficients::from_flow(&params, beta0, cs)
        .context("coefficient schedule rejected (ell must lie in (1/3, 3/4))")?;
    if coeffs.exceeds_error_threshold || coeffs.exceeds_spectral_threshold {
        eprintln!(
            "note: beta0 = {beta0} exceeds the proof-side smallness thresholds \
             (error {}, spectral {:.3e}); the run proceeds with the theorem-level range",
            hypo::BETA0_ERROR_THRESHOLD,
            1.0 / (32.0f64 * cs).powi(4)
        );
    }

    let tau_end = args.tau_end.or(file.f64("tau_end")?).unwrap_or(3.0 * coeffs.t_mu);
    let dt = args.dt.or(file.f64("dt")?).unwrap_or(0.005);
    let config = SolverConfig::new(dt, tau_end, stride, Frame::Moving)?;
    let theta0 = datum.build(grid);
    let traj = solver::solve(&theta0, &params, &config)?;

    let series = hypo::ledger_series(&traj, &coeffs);
    let mut csv = Vec::new();
    hypo::ledger_csv(&series, &coeffs, &mut csv)?;
    write_artifact(&cli.out, "ledger.csv", &csv)?;

    let residuals = hypo::identity_residuals(&traj, &coeffs)?;
    let residuals_ok = residuals.iter().all(|r| *r <= 1e-3);

    let mut coercivity_violations = 0usize;
    for l in &series {
        let check = hypo::coercivity_check(l, &coeffs);
        if !(check.lower_ok && check.upper_ok) {
            coercivity_violations += 1;
        }
    }

    let phi = hypo::phi_series(&traj, &coeffs);
    let covers_burn_in = tau_end >= coeffs.t_mu;
    let burn = if covers_burn_in { Some(hypo::burn_in_check(&traj, &coeffs)?) } else { None };

    // Exact rational audit at the nearest rational to the requested ell.
    let ell_rational = num_rational_approx(ell)?;
    let (p, q) = hypo::exponents_exact(ell_rational);
    let audit = hypo::constraint_audit(ell_rational, p, q);
    let mut csv = Vec::new();
    hypo::audit_csv(&audit, &mut csv)?;
    write_artifact(&cli.out, "audit.csv", &csv)?;

    let mut resolved = ResolvedConfig::default();
    resolved.put("nu", nu);
    resolved.put("c0", c0);
    resolved.put("ell", ell);
    resolved.put("alpha", alpha);
    resolved.put("k", k);
    resolved.put("beta0", beta0);
    resolved.put("cs", cs);
    resolved.put("dt", dt);
    resolved.put("tau_end", tau_end);
    resolved.put("stride", stride);
    resolved.put("n", n);
    resolved.put("seed", cli.seed);

    let burn_ok = burn.map(|b| b.integral_ok && b.pointwise_ok).unwrap_or(true);
    let pass = residuals_ok
        && coercivity_violations == 0
        && phi.monotone_after_burn_in
        && audit.all_pass
        && burn_ok;
    let summary = json!({
        "command": "hypo",
        "cs": cs,
        "lambda_mu": coeffs.lambda_mu,
        "t_mu": coeffs.t_mu,
        "beta0_exceeds_thresholds":
            coeffs.exceeds_error_threshold || coeffs.exceeds_spectral_threshold,
        "identity_residuals": residuals.to_vec(),
        "identity_residuals_ok": residuals_ok,
        "coercivity_violations": coercivity_violations,
        "phi_monotone_after_burn_in": phi.monotone_after_burn_in,
        "phi_first_violation": phi.first_violation,
        "phi_envelope_rate": phi.envelope_rate,
        "phi_fitted_rate": phi.fitted_rate,
        "burn_in_ok": burn_ok,
        "constraint_audit_ok": audit.all_pass,
        "pass": pass,
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

/// Small-denominator rational approximation for the exact audit.
fn num_rational_approx(x: f64) -> Result<num_rational::Rational64> {
    let denom = 10_000i64;
    let numer = (x * denom as f64).round() as i64;
    let r = num_rational::Rational64::new(numer, denom);
    if (x - (*r.numer() as f64 / *r.denom() as f64)).abs() > 1e-9 {
        bail!("ell = {x} is not representable for the exact audit");
    }
    Ok(r)
}

fn sweep_cmd(cli: &Cli, file: &FileConfig, args: &SweepArgs) -> Result<bool> {
    file.reject_unknown_keys(&[
        "ell_list", "nu_min", "nu_max", "nu_count", "c0", "alpha", "k", "eps", "theta0",
        "stationary",
    ])?;

    let ell_list = match &args.ell_list {
        Some(s) => parse_f64_list(s)?,
        None => file.f64_list("ell_list")?.unwrap_or_else(|| vec![0.40, 0.50, 0.60, 0.70]),
    };
    let nu_min = args.nu_min.or(file.f64("nu_min")?).unwrap_or(1e-5);
    let nu_max = args.nu_max.or(file.f64("nu_max")?).unwrap_or(1e-2);
    let nu_count = args.nu_count.or(file.usize("nu_count")?).unwrap_or(8);
    let c0 = args.c0.or(file.f64("c0")?).unwrap_or(1.0);
    let alpha = args.alpha.or(file.f64("alpha")?).unwrap_or(1.0);
    let k = args.k.or(file.i32("k")?).unwrap_or(1);
    let eps = args.eps.or(file.f64("eps")?).unwrap_or(experiments::DEFAULT_EPS);
    let datum = parse_theta0(
        &args.theta0.clone().or(file.string("theta0")?).unwrap_or_else(|| "cos2y".into()),
    )?;
    let stationary = args.stationary || file.bool("stationary")?.unwrap_or(false);

    let nu_grid = experiments::log_grid(nu_min, nu_max, nu_count);
    let report = if stationary {
        experiments::run_stationary_control(&nu_grid, alpha, k, eps, datum)?
    } else {
        let settings = SweepSettings {
            ell_grid: ell_list.clone(),
            nu_grid: nu_grid.clone(),
            c0,
            alpha,
            k,
            eps,
            theta0: datum,
        };
        experiments::run_sweep(&settings)
            .context("sweep rejected (every ell must lie in (1/3, 3/4))")?
    };

    let mut csv = Vec::new();
    experiments::sweep_csv(&report, &mut csv)?;
    write_artifact(&cli.out, "sweep.csv", &csv)?;

    let fits: Vec<serde_json::Value> = report
        .fits
        .iter()
        .map(|f| {
            let ok = if stationary {
                (-0.56..=-0.44).contains(&f.fitted_slope)
            } else {
                f.rel_err <= 0.10
            };
            json!({
                "ell": f.ell,
                "fitted_slope": f.fitted_slope,
                "predicted_slope": f.predicted_slope,
                "rel_err": f.rel_err,
                "r2": f.r2,
                "ok": ok,
            })
        })
        .collect();
    let pass = fits.iter().all(|f| f["ok"].as_bool().unwrap_or(false))
        && report.rows.iter().all(|r| !r.tail_flagged);

    let mut resolved = ResolvedConfig::default();
    if !stationary {
        resolved.put_list("ell_list", &ell_list);
        resolved.put("c0", c0);
    }
    resolved.put("nu_min", nu_min);
    resolved.put("nu_max", nu_max);
    resolved.put("nu_count", nu_count);
    resolved.put("alpha", alpha);
    resolved.put("k", k);
    resolved.put("eps", eps);
    resolved.put("stationary", stationary);
    resolved.put("seed", cli.seed);

    let summary = json!({
        "command": "sweep",
        "stationary": stationary,
        "fits": fits,
        "cells": report.rows.len(),
        "tail_ok": report.rows.iter().all(|r| !r.tail_flagged),
        "pass": pass,
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

fn largec_cmd(cli: &Cli, file: &FileConfig, args: &LargecArgs) -> Result<bool> {
    file.reject_unknown_keys(&["c_list", "nu", "t_star", "alpha", "dt", "n"])?;

    let c_list = match &args.c_list {
        Some(s) => parse_f64_list(s)?,
        None => file.f64_list("c_list")?.unwrap_or_else(|| vec![5.0, 10.0, 20.0, 40.0, 80.0]),
    };
    let nu = args.nu.or(file.f64("nu")?).unwrap_or(0.01);
    let t_star = args.t_star.or(file.f64("t_star")?).unwrap_or(2.0);
    let alpha = args.alpha.or(file.f64("alpha")?).unwrap_or(1.0);
    let dt = args.dt.or(file.f64("dt")?).unwrap_or(0.005);
    let n = args.n.or(file.usize("n")?).unwrap_or(128);

    let grid = Grid::new(n)?;
    let settings = LargeCSettings {
        c_grid: c_list.clone(),
        nu,
        t_star,
        alpha,
        dt,
        modes: experiments::sin_x_sin_2y_modes(grid),
    };
    let report = experiments::large_c_compare(&settings)?;

    let mut csv = Vec::new();
    experiments::large_c_csv(&report, &mut csv)?;
    write_artifact(&cli.out, "largec.csv", &csv)?;

    let slope_ok = report.alpha == 0.0 || (-1.2..=-0.8).contains(&report.slope);
    let pass = slope_ok && report.psi_ok && report.monotone_in_c;

    let mut resolved = ResolvedConfig::default();
    resolved.put_list("c_list", &c_list);
    resolved.put("nu", nu);
    resolved.put("t_star", t_star);
    resolved.put("alpha", alpha);
    resolved.put("dt", dt);
    resolved.put("n", n);
    resolved.put("seed", cli.seed);

    let summary = json!({
        "command": "largec",
        "slope": report.slope,
        "slope_ok": slope_ok,
        "psi_ok": report.psi_ok,
        "psi_max_ratio": report.psi_max_ratio,
        "monotone_in_c": report.monotone_in_c,
        "pass": pass,
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

fn snapshots_cmd(cli: &Cli, file: &FileConfig, args: &SnapshotsArgs) -> Result<bool> {
    file.reject_unknown_keys(&["c", "k", "n", "theta0"])?;

    let c = args.c.or(file.f64("c")?).unwrap_or(0.1);
    let k = args.k.or(file.i32("k")?).unwrap_or(1);
    let n = args.n.or(file.usize("n")?).unwrap_or(Grid::DEFAULT_N);
    let datum = parse_theta0(
        &args.theta0.clone().or(file.string("theta0")?).unwrap_or_else(|| "cos2y".into()),
    )?;

    let grid = Grid::new(n)?;
    let theta0 = datum.build(grid);
    let exp = experiments::snapshot_experiment(c, k, &theta0)?;

    let mut index = String::new();
    for (i, (field, t)) in exp.fields.iter().zip(&exp.times).enumerate() {
        let name = format!("snapshot_{i}.bin");
        let mut bytes = Vec::new();
        solver::write_field_binary(field, &mut bytes)?;
        fs::write(cli.out.join(&name), bytes)?;
        index.push_str(&format!("{name} t={t}\n"));
    }
    write_artifact(&cli.out, "index.txt", index.as_bytes())?;

    let gradient_growth = exp.h1_norms[1] > exp.h1_norms[0] && exp.h1_norms[2] > exp.h1_norms[1];
    let pass = exp.periodicity_error <= 1e-10 && gradient_growth;

    let mut resolved = ResolvedConfig::default();
    resolved.put("c", c);
    resolved.put("k", k);
    resolved.put("n", n);
    resolved.put("seed", cli.seed);

    let summary = json!({
        "command": "snapshots",
        "times": exp.times.to_vec(),
        "l2_norms": exp.l2_norms.to_vec(),
        "h1_norms": exp.h1_norms.to_vec(),
        "periodicity_error": exp.periodicity_error,
        "gradient_growth": gradient_growth,
        "pass": pass,
    });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

fn check_cmd(cli: &Cli) -> Result<bool> {
    let results = driftshear::checks::run_all(cli.seed);
    let mut pass = true;
    let mut rows = Vec::new();
    let mut csv = String::new();
    csv.push_str("check,passed,detail\n");
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {} {}", r.name, r.detail);
        csv.push_str(&format!("{},{},{}\n", r.name, r.passed, r.detail.replace(',', ";")));
        rows.push(json!({ "name": r.name, "passed": r.passed, "detail": r.detail }));
        pass &= r.passed;
    }
    write_artifact(&cli.out, "checks.csv", csv.as_bytes())?;

    let mut resolved = ResolvedConfig::default();
    resolved.put("seed", cli.seed);
    let summary = json!({ "command": "check", "checks": rows, "pass": pass });
    finish(&cli.out, &resolved, &summary)?;
    Ok(pass)
}

/// Render one CSV line of floats with the shortest round-trip formatting.
pub fn csv_line(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
    line
}
