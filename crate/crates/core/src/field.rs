use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Fraction of the mode band (top of |m|) whose energy is monitored as
/// under-resolution tail mass.
pub const TAIL_BAND: f64 = 0.1;

/// Tail-mass fraction above which a run is flagged as under-resolved.
pub const TAIL_TOLERANCE: f64 = 1e-10;

pub(crate) fn fft_forward_in_place(buf: &mut [Complex64]) {
    // A planner per call is cheap relative to the solves here, but caching
    // avoids re-deriving twiddles in the hot stepping loop.
    thread_local! {
        static PLANNER: Mutex<FftPlanner<f64>> = Mutex::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let fft = p.lock().unwrap().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

pub(crate) fn fft_inverse_in_place(buf: &mut [Complex64]) {
    thread_local! {
        static PLANNER: Mutex<FftPlanner<f64>> = Mutex::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let fft = p.lock().unwrap().plan_fft_inverse(buf.len());
        fft.process(buf);
    });
}

/// Discrete Fourier coefficients of physical samples, under the convention
/// g_hat_m = (1/n) sum_j g(y_j) exp(-i m y_j).
pub fn forward_transform(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf = values.to_vec();
    fft_forward_in_place(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Physical samples from coefficients: g(y_j) = sum_m g_hat_m exp(i m y_j).
pub fn inverse_transform(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    fft_inverse_in_place(&mut buf);
    buf
}

/// Complex scalar sampled on a periodic grid, carried in both the physical
/// and the Fourier representation (always kept in sync).
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<Complex64>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(values.len(), grid.len()));
        }
        let coeffs = forward_transform(&values);
        Ok(SpectralField { grid, values, coeffs })
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(coeffs.len(), grid.len()));
        }
        let values = inverse_transform(&coeffs);
        Ok(SpectralField { grid, values, coeffs })
    }

    /// Sample a closure at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values: Vec<Complex64> = grid.nodes().map(f).collect();
        let coeffs = forward_transform(&values);
        SpectralField { grid, values, coeffs }
    }

    pub fn zero(grid: Grid) -> Self {
        SpectralField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// cos(2y), the default initial datum of the experiment drivers.
    pub fn cos_2y(grid: Grid) -> Self {
        Self::from_fn(grid, |y| Complex64::new((2.0 * y).cos(), 0.0))
    }

    /// exp(i m y), a single Fourier mode.
    pub fn single_mode(grid: Grid, m: i64) -> Self {
        Self::from_fn(grid, |y| Complex64::from_polar(1.0, m as f64 * y))
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff_of_mode(&self, m: i64) -> Complex64 {
        self.grid
            .index_of_mode(m)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Sobolev norm ||g||_{H^s} = (2 pi * sum_m (1+m^2)^s |g_hat_m|^2)^{1/2}.
    ///
    /// s = 0 is the L^2 norm, s = 1 the H^1 norm, s = -1 the dual H^{-1} norm.
    /// The 2 pi factor makes s = 0 agree exactly with the grid quadrature
    /// (2 pi / n) sum_j |g(y_j)|^2 on trigonometric polynomials.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .map(|(c, m)| {
                let w = 1.0 + (m * m) as f64;
                w.powf(s) * c.norm_sqr()
            })
            .sum();
        (2.0 * PI * sum).sqrt()
    }

    /// Spectral derivative of order `order` (multiplication by (i m)^order).
    pub fn derivative(&self, order: u32) -> SpectralField {
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(self.grid.modes())
            .map(|(c, m)| c * Complex64::new(0.0, m as f64).powu(order))
            .collect();
        let values = inverse_transform(&coeffs);
        SpectralField { grid: self.grid, values, coeffs }
    }

    /// L^2 inner product <f, g> = int f conj(g) dy by grid quadrature,
    /// conjugate-linear in the second argument.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        let w = self.grid.weight();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * w
    }

    /// Fraction of |g_hat|^2 mass carried by the top `TAIL_BAND` of |m|.
    ///
    /// Multiplication by sin(y) couples only adjacent modes, so a healthy
    /// resolution keeps this band empty; a fraction above `TAIL_TOLERANCE`
    /// signals under-resolution.
    pub fn tail_mass_fraction(&self) -> f64 {
        let cutoff = ((self.grid.len() / 2) as f64 * (1.0 - TAIL_BAND)) as i64;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (c, m) in self.coeffs.iter().zip(self.grid.modes()) {
            let e = c.norm_sqr();
            total += e;
            if m.abs() >= cutoff {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Pointwise product with a real profile sampled at the nodes.
    pub fn mul_profile(&self, profile: impl Fn(f64) -> f64) -> SpectralField {
        let values: Vec<Complex64> = self
            .grid
            .nodes()
            .zip(&self.values)
            .map(|(y, v)| v * profile(y))
            .collect();
        let coeffs = forward_transform(&values);
        SpectralField { grid: self.grid, values, coeffs }
    }

    pub fn scale(&self, a: Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.len(), other.grid.len()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SpectralField { grid: self.grid, values, coeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> SpectralField {
        let values: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        SpectralField::from_values(grid, values).unwrap()
    }

    #[test]
    fn constant_field_transforms_to_mode_zero() {
        let grid = Grid::new(64).unwrap();
        let f = SpectralField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        assert!((f.coeff_of_mode(0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for m in 1..grid.max_mode() {
            assert!(f.coeff_of_mode(m).norm() < 1e-14);
            assert!(f.coeff_of_mode(-m).norm() < 1e-14);
        }
    }

    #[test]
    fn single_mode_transforms_to_unit_coefficient() {
        let grid = Grid::new(64).unwrap();
        let f = SpectralField::single_mode(grid, 1);
        assert!((f.coeff_of_mode(1) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(f.coeff_of_mode(0).norm() < 1e-14);
        assert!(f.coeff_of_mode(-1).norm() < 1e-14);
    }

    #[test]
    fn round_trip_relative_error_below_1e13() {
        let grid = Grid::new(256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let f = random_field(grid, &mut rng);
            let back = inverse_transform(&forward_transform(f.values()));
            let err: f64 = f
                .values()
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let norm: f64 = f.values().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!(err / norm <= 1e-13, "round trip error {}", err / norm);
        }
    }

    #[test]
    fn forward_transform_is_idempotent_on_synced_field() {
        let grid = Grid::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_field(grid, &mut rng);
        let again = forward_transform(f.values());
        for (a, b) in f.coeffs().iter().zip(&again) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parseval_identity_on_random_fields() {
        let grid = Grid::new(128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = random_field(grid, &mut rng);
            let quad: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.weight();
            let spec: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * 2.0 * PI;
            assert!((quad - spec).abs() / quad <= 1e-12);
        }
    }

    #[test]
    fn sobolev_norm_closed_forms() {
        let grid = Grid::new(128).unwrap();
        let zero = SpectralField::zero(grid);
        assert_eq!(zero.sobolev_norm(-1.0), 0.0);
        assert_eq!(zero.sobolev_norm(2.0), 0.0);

        // exp(iy): ||.||_{H^-1}^2 = 2 pi / 2 = pi.
        let e1 = SpectralField::single_mode(grid, 1);
        assert!((e1.sobolev_norm(-1.0) - PI.sqrt()).abs() < 1e-12);

        // cos(2y): hand integral int (cos^2 2y + 4 sin^2 2y) dy = 5 pi.
        let c2 = SpectralField::cos_2y(grid);
        assert!((c2.sobolev_norm(1.0) - (5.0 * PI).sqrt()).abs() < 1e-12);

        // Same value by grid quadrature of |g|^2 + |g'|^2 with the analytic
        // derivative -2 sin 2y (independent of the spectral path).
        let quad: f64 = grid
            .nodes()
            .map(|y| {
                let g = (2.0 * y).cos();
                let dg = -2.0 * (2.0 * y).sin();
                g * g + dg * dg
            })
            .sum::<f64>()
            * grid.weight();
        assert!((c2.sobolev_norm(1.0) - quad.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sobolev_norm_monotone_in_order() {
        let grid = Grid::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = random_field(grid, &mut rng);
            let l2 = f.sobolev_norm(0.0);
            for s in [-2.0, -1.0, -0.5] {
                assert!(f.sobolev_norm(s) <= l2 + 1e-12);
            }
            for s in [0.5, 1.0, 2.0] {
                assert!(f.sobolev_norm(s) >= l2 - 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_analytic() {
        let grid = Grid::new(64).unwrap();
        let f = SpectralField::cos_2y(grid);
        let df = f.derivative(1);
        for (y, v) in grid.nodes().zip(df.values()) {
            assert!((v.re + 2.0 * (2.0 * y).sin()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn tail_mass_flags_unresolved_content() {
        let grid = Grid::new(64).unwrap();
        let smooth = SpectralField::cos_2y(grid);
        assert!(smooth.tail_mass_fraction() < TAIL_TOLERANCE);
        let spiky = SpectralField::single_mode(grid, 30);
        assert!(spiky.tail_mass_fraction() > 0.99);
    }
}
