use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{
    fft_forward_in_place, fft_inverse_in_place, SpectralField, TAIL_TOLERANCE,
};
use crate::grid::Grid;
use crate::params::{FlowParams, ScaledParams};

/// Which equation a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Lab frame: d/dt theta = -i alpha k sin(y - ct) theta - nu k^2 theta
    /// + nu d^2 theta.
    Lab,
    /// Moving frame (scaled time tau = alpha|k| t):
    /// d/dtau theta = varsigma d theta + mu d^2 theta - i sgn(k) sin(y) theta.
    Moving,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub frame: Frame,
}

/// Soft cap on stored snapshots; long runs auto-coarsen their stride.
pub const MAX_SNAPSHOTS: usize = 4000;

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, snapshot_stride: usize, frame: Frame) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
        }
        if !(t_end >= 0.0) {
            return Err(Error::OutOfRange { name: "t_end", value: t_end, range: "[0, inf)" });
        }
        if snapshot_stride == 0 {
            return Err(Error::OutOfRange {
                name: "snapshot_stride",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(SolverConfig { dt, t_end, snapshot_stride, frame })
    }

    /// Default step min(0.01, 0.1/(alpha |k|)) with the stride chosen so a
    /// run stores at most ~`MAX_SNAPSHOTS` states.
    pub fn auto(params: &FlowParams, t_end: f64, frame: Frame) -> Result<Self> {
        let dt = default_dt(params);
        let steps = (t_end / dt).ceil() as usize;
        let stride = (steps / MAX_SNAPSHOTS).max(1);
        Self::new(dt, t_end, stride, frame)
    }
}

pub fn default_dt(params: &FlowParams) -> f64 {
    (0.1 / params.advective_rate()).min(0.01)
}

/// sin(x)/x, series near zero.
#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Accumulated advection phase psi(y, t) = int_0^t sin(y - c s) ds.
///
/// Written as t sin(y - ct/2) sinc(ct/2), which equals
/// (cos(y - ct) - cos y)/c without the cancellation that form suffers for
/// small c t, and degenerates smoothly to t sin(y) at c = 0.
pub fn phase(y: f64, t: f64, c: f64) -> f64 {
    let half = 0.5 * c * t;
    t * (y - half).sin() * sinc(half)
}

/// Exact increment psi(y, t+dt) - psi(y, t) = dt sin(y - c(t + dt/2)) sinc(c dt/2).
#[inline]
pub fn phase_increment(y: f64, t: f64, dt: f64, c: f64) -> f64 {
    let half = 0.5 * c * dt;
    dt * (y - c * t - half).sin() * sinc(half)
}

/// Moving-frame advection-reaction phase over one step of length h:
/// int_0^h sin(y + varsigma u) du = h sin(y + varsigma h/2) sinc(varsigma h/2).
#[inline]
fn moving_reaction_phase(y: f64, h: f64, varsigma: f64) -> f64 {
    let half = 0.5 * varsigma * h;
    h * (y + half).sin() * sinc(half)
}

/// Closed-form inviscid solution theta0(y) exp(-i alpha k psi(y, t)).
///
/// The phase factor is unimodular, so the L^2 norm is preserved exactly.
pub fn exact_inviscid(theta0: &SpectralField, params: &FlowParams, t: f64) -> Result<SpectralField> {
    if params.nu != 0.0 {
        return Err(Error::RequiresInviscid(params.nu));
    }
    let c = params.speed();
    let ak = params.alpha * params.k as f64;
    let grid = theta0.grid();
    let values: Vec<Complex64> = grid
        .nodes()
        .zip(theta0.values())
        .map(|(y, v)| v * Complex64::from_polar(1.0, -ak * phase(y, t, c)))
        .collect();
    SpectralField::from_values(grid, values)
}

/// Per-mode heat solution: coefficient m is damped by exp(-nu (m^2 + k^2) t).
pub fn heat_solution(theta0: &SpectralField, k: i32, nu: f64, t: f64) -> SpectralField {
    let grid = theta0.grid();
    let ksq = (k as f64) * (k as f64);
    let coeffs: Vec<Complex64> = theta0
        .coeffs()
        .iter()
        .zip(grid.modes())
        .map(|(c, m)| c * (-nu * ((m * m) as f64 + ksq) * t).exp())
        .collect();
    SpectralField::from_coeffs(grid, coeffs).expect("same grid")
}

/// Precomputed Strang-splitting stepper. Both substeps are exact flows:
/// diffusion acts diagonally in Fourier space and the advection (plus the
/// moving-frame transport shift) is applied through closed-form phase
/// increments, so the only error is the O(dt^2) splitting error.
struct Stepper {
    grid: Grid,
    dt: f64,
    /// Half-step diffusion factor per coefficient slot.
    half_diffusion: Vec<f64>,
    kind: StepKind,
}

enum StepKind {
    Lab {
        alpha_k: f64,
        c: f64,
    },
    Moving {
        /// Transport shift exp(i m varsigma dt) per slot.
        shift: Vec<Complex64>,
        /// Pointwise factor exp(-i sgn(k) * int sin) per node.
        multiplier: Vec<Complex64>,
    },
}

impl Stepper {
    fn new(grid: Grid, params: &FlowParams, dt: f64, frame: Frame) -> Self {
        match frame {
            Frame::Lab => {
                let nu = params.nu;
                let ksq = (params.k as f64) * (params.k as f64);
                let half_diffusion = grid
                    .modes()
                    .map(|m| (-nu * ((m * m) as f64 + ksq) * dt / 2.0).exp())
                    .collect();
                Stepper {
                    grid,
                    dt,
                    half_diffusion,
                    kind: StepKind::Lab { alpha_k: params.alpha * params.k as f64, c: params.speed() },
                }
            }
            Frame::Moving => {
                let scaled = params.scaled();
                let sgn = params.k.signum() as f64;
                let half_diffusion = grid
                    .modes()
                    .map(|m| (-scaled.mu * (m * m) as f64 * dt / 2.0).exp())
                    .collect();
                let shift = grid
                    .modes()
                    .map(|m| Complex64::from_polar(1.0, m as f64 * scaled.varsigma * dt))
                    .collect();
                let multiplier = grid
                    .nodes()
                    .map(|y| {
                        Complex64::from_polar(1.0, -sgn * moving_reaction_phase(y, dt, scaled.varsigma))
                    })
                    .collect();
                Stepper { grid, dt, half_diffusion, kind: StepKind::Moving { shift, multiplier } }
            }
        }
    }

    /// Advance coefficients in place from time `t` to `t + dt`.
    fn step(&self, coeffs: &mut [Complex64], t: f64) {
        for (c, h) in coeffs.iter_mut().zip(&self.half_diffusion) {
            *c *= *h;
        }
        match &self.kind {
            StepKind::Lab { alpha_k, c } => {
                fft_inverse_in_place(coeffs);
                for (v, y) in coeffs.iter_mut().zip(self.grid.nodes()) {
                    *v *= Complex64::from_polar(1.0, -alpha_k * phase_increment(y, t, self.dt, *c));
                }
                fft_forward_in_place(coeffs);
                let scale = 1.0 / self.grid.len() as f64;
                for v in coeffs.iter_mut() {
                    *v *= scale;
                }
            }
            StepKind::Moving { shift, multiplier } => {
                for (c, s) in coeffs.iter_mut().zip(shift) {
                    *c *= *s;
                }
                fft_inverse_in_place(coeffs);
                for (v, m) in coeffs.iter_mut().zip(multiplier) {
                    *v *= *m;
                }
                fft_forward_in_place(coeffs);
                let scale = 1.0 / self.grid.len() as f64;
                for v in coeffs.iter_mut() {
                    *v *= scale;
                }
            }
        }
        for (c, h) in coeffs.iter_mut().zip(&self.half_diffusion) {
            *c *= *h;
        }
    }
}

/// One Strang step; local error O(dt^3), global O(dt^2).
pub fn strang_step(
    state: &SpectralField,
    t: f64,
    dt: f64,
    params: &FlowParams,
    frame: Frame,
) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
    }
    let stepper = Stepper::new(state.grid(), params, dt, frame);
    let mut coeffs = state.coeffs().to_vec();
    stepper.step(&mut coeffs, t);
    SpectralField::from_coeffs(state.grid(), coeffs)
}

/// Time series of states produced by one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// L^2 norm per sample.
    pub norms: Vec<f64>,
    pub params: FlowParams,
    pub scaled: ScaledParams,
    pub frame: Frame,
    /// First snapshot (time, fraction) at which the tail-mass monitor
    /// exceeded `TAIL_TOLERANCE`, if any, plus the worst fraction seen.
    pub tail_warning: Option<(f64, f64)>,
    pub max_tail_fraction: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Uniform snapshot spacing, when the sampling is uniform.
    pub fn snapshot_spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let h = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        uniform.then_some(h)
    }

    /// Index of the last snapshot with time <= t (+ small slack).
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let slack = 1e-9 * t.abs().max(1.0);
        self.times.iter().rposition(|&s| s <= t + slack)
    }

    pub fn export_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,l2_norm,h1_norm,tail_mass")?;
        for (i, state) in self.states.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                self.times[i],
                self.norms[i],
                state.sobolev_norm(1.0),
                state.tail_mass_fraction()
            )?;
        }
        Ok(())
    }
}

/// Integrate from `theta0`; snapshots every `snapshot_stride` steps (the
/// final state is always stored). Deterministic for identical inputs.
pub fn solve(theta0: &SpectralField, params: &FlowParams, config: &SolverConfig) -> Result<Trajectory> {
    if !(config.dt > 0.0) {
        return Err(Error::OutOfRange { name: "dt", value: config.dt, range: "(0, inf)" });
    }
    let grid = theta0.grid();
    let stepper = Stepper::new(grid, params, config.dt, config.frame);
    let n_steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut norms = Vec::new();
    let mut tail_warning = None;
    let mut max_tail: f64 = 0.0;

    let mut record = |step: usize, coeffs: &[Complex64]| -> Result<()> {
        let t = step as f64 * config.dt;
        let field = SpectralField::from_coeffs(grid, coeffs.to_vec())?;
        let tail = field.tail_mass_fraction();
        if tail > max_tail {
            max_tail = tail;
        }
        if tail > TAIL_TOLERANCE && tail_warning.is_none() {
            tail_warning = Some((t, tail));
        }
        times.push(t);
        norms.push(field.sobolev_norm(0.0));
        states.push(field);
        Ok(())
    };

    let mut coeffs = theta0.coeffs().to_vec();
    record(0, &coeffs)?;
    for step in 0..n_steps {
        stepper.step(&mut coeffs, step as f64 * config.dt);
        let done = step + 1;
        if done % config.snapshot_stride == 0 || done == n_steps {
            record(done, &coeffs)?;
        }
    }

    Ok(Trajectory {
        times,
        states,
        norms,
        params: *params,
        scaled: params.scaled(),
        frame: config.frame,
        tail_warning,
        max_tail_fraction: max_tail,
    })
}

/// Norm series of a run without retained states; what the long parameter
/// sweeps consume (4000 snapshots of a 2048-point field would otherwise
/// dominate memory).
#[derive(Debug, Clone)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub tail_warning: Option<(f64, f64)>,
    pub max_tail_fraction: f64,
}

/// Like [`solve`], recording only the L^2 norm and the tail monitor.
pub fn solve_norms(
    theta0: &SpectralField,
    params: &FlowParams,
    config: &SolverConfig,
) -> Result<NormSeries> {
    if !(config.dt > 0.0) {
        return Err(Error::OutOfRange { name: "dt", value: config.dt, range: "(0, inf)" });
    }
    let grid = theta0.grid();
    let stepper = Stepper::new(grid, params, config.dt, config.frame);
    let n_steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;

    let cutoff = ((grid.len() / 2) as f64 * (1.0 - crate::field::TAIL_BAND)) as i64;
    let mut times = Vec::new();
    let mut l2 = Vec::new();
    let mut tail_warning = None;
    let mut max_tail: f64 = 0.0;

    let mut record = |step: usize, coeffs: &[Complex64]| {
        let t = step as f64 * config.dt;
        let mut total = 0.0;
        let mut tail = 0.0;
        for (c, m) in coeffs.iter().zip(grid.modes()) {
            let e = c.norm_sqr();
            total += e;
            if m.abs() >= cutoff {
                tail += e;
            }
        }
        let frac = if total == 0.0 { 0.0 } else { tail / total };
        if frac > max_tail {
            max_tail = frac;
        }
        if frac > TAIL_TOLERANCE && tail_warning.is_none() {
            tail_warning = Some((t, frac));
        }
        times.push(t);
        l2.push((2.0 * PI * total).sqrt());
    };

    let mut coeffs = theta0.coeffs().to_vec();
    record(0, &coeffs);
    for step in 0..n_steps {
        stepper.step(&mut coeffs, step as f64 * config.dt);
        let done = step + 1;
        if done % config.snapshot_stride == 0 || done == n_steps {
            record(done, &coeffs);
        }
    }
    Ok(NormSeries { times, l2, tail_warning, max_tail_fraction: max_tail })
}

/// Sample the closed-form inviscid evolution at the given times.
pub fn inviscid_trajectory(
    theta0: &SpectralField,
    params: &FlowParams,
    times: &[f64],
) -> Result<Trajectory> {
    if params.nu != 0.0 {
        return Err(Error::RequiresInviscid(params.nu));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let s = exact_inviscid(theta0, params, t)?;
        norms.push(s.sobolev_norm(0.0));
        states.push(s);
    }
    let max_tail = states
        .iter()
        .map(|s| s.tail_mass_fraction())
        .fold(0.0, f64::max);
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        norms,
        params: *params,
        scaled: params.scaled(),
        frame: Frame::Lab,
        tail_warning: None,
        max_tail_fraction: max_tail,
    })
}

fn frame_map(state: &SpectralField, t: f64, params: &FlowParams, forward: bool) -> SpectralField {
    let c = params.speed();
    let nu_ksq = params.nu * (params.k as f64) * (params.k as f64);
    let amp = if forward { (nu_ksq * t).exp() } else { (-nu_ksq * t).exp() };
    let sign = if forward { 1.0 } else { -1.0 };
    let grid = state.grid();
    let coeffs: Vec<Complex64> = state
        .coeffs()
        .iter()
        .zip(grid.modes())
        .map(|(coef, m)| coef * amp * Complex64::from_polar(1.0, sign * m as f64 * c * t))
        .collect();
    SpectralField::from_coeffs(grid, coeffs).expect("same grid")
}

/// Pass a lab-frame trajectory to the moving frame:
/// theta(y, tau) = exp(nu k^2 t) Theta_hat(y + c t, t) with tau = alpha|k| t.
pub fn to_moving_frame(traj: &Trajectory) -> Trajectory {
    let ak = traj.params.advective_rate();
    let times: Vec<f64> = traj.times.iter().map(|&t| ak * t).collect();
    let states: Vec<SpectralField> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| frame_map(s, t, &traj.params, true))
        .collect();
    let norms = states.iter().map(|s| s.sobolev_norm(0.0)).collect();
    Trajectory {
        times,
        states,
        norms,
        params: traj.params,
        scaled: traj.scaled,
        frame: Frame::Moving,
        tail_warning: traj.tail_warning,
        max_tail_fraction: traj.max_tail_fraction,
    }
}

/// Inverse of [`to_moving_frame`]; the round trip is the identity to
/// rounding accuracy.
pub fn from_moving_frame(traj: &Trajectory) -> Trajectory {
    let ak = traj.params.advective_rate();
    let times: Vec<f64> = traj.times.iter().map(|&tau| tau / ak).collect();
    let states: Vec<SpectralField> = times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| frame_map(s, t, &traj.params, false))
        .collect();
    let norms = states.iter().map(|s| s.sobolev_norm(0.0)).collect();
    Trajectory {
        times,
        states,
        norms,
        params: traj.params,
        scaled: traj.scaled,
        frame: Frame::Lab,
        tail_warning: traj.tail_warning,
        max_tail_fraction: traj.max_tail_fraction,
    }
}

/// Binary field dump: n as little-endian u64, then the n physical samples
/// as (re, im) pairs of little-endian f64.
pub fn write_field_binary(field: &SpectralField, mut w: impl Write) -> Result<()> {
    w.write_all(&(field.grid().len() as u64).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary(mut r: impl std::io::Read) -> Result<SpectralField> {
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let n = u64::from_le_bytes(len8) as usize;
    let grid = Grid::new(n)?;
    let mut values = Vec::with_capacity(n);
    let mut f8 = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut f8)?;
        let re = f64::from_le_bytes(f8);
        r.read_exact(&mut f8)?;
        let im = f64::from_le_bytes(f8);
        values.push(Complex64::new(re, im));
    }
    SpectralField::from_values(grid, values)
}
