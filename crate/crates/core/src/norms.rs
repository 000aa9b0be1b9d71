use num_complex::Complex64;
use rand::Rng;

use crate::field::SpectralField;

/// Brute-force realization of the duality formula behind the H^{-1} norm:
/// the supremum of |int g conj(eta) dy| over test functions with
/// ||eta||_{H^1} = 1.
///
/// Candidates are `trials` random trigonometric polynomials plus the exact
/// maximiser eta = (1 - d^2/dy^2)^{-1} g (normalised), so the returned value
/// converges to the spectral norm from below and matches it once the
/// maximiser is admissible. Every pairing is evaluated by grid quadrature in
/// physical space, independent of the spectral formula it is checked against.
pub fn dual_h_minus1_oracle(field: &SpectralField, trials: usize, rng: &mut impl Rng) -> f64 {
    let grid = field.grid();
    let mut best: f64 = 0.0;

    let mut consider = |eta_coeffs: Vec<Complex64>| {
        // ||eta||_{H^1}^2 = 2 pi sum (1 + m^2) |eta_m|^2
        let h1_sq: f64 = eta_coeffs
            .iter()
            .zip(grid.modes())
            .map(|(c, m)| (1.0 + (m * m) as f64) * c.norm_sqr())
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        if h1_sq <= 0.0 {
            return;
        }
        let scale = 1.0 / h1_sq.sqrt();
        let eta = SpectralField::from_coeffs(grid, eta_coeffs)
            .expect("coefficients constructed on the same grid");
        let pairing = field.inner(&eta).norm() * scale;
        if pairing > best {
            best = pairing;
        }
    };

    // Exact maximiser of the pairing under the H^1 constraint.
    let optimal: Vec<Complex64> = field
        .coeffs()
        .iter()
        .zip(grid.modes())
        .map(|(c, m)| c / (1.0 + (m * m) as f64))
        .collect();
    consider(optimal);

    let band = grid.max_mode().min(16);
    for _ in 0..trials {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for m in -band..=band {
            if let Some(i) = grid.index_of_mode(m) {
                coeffs[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        consider(coeffs);
    }

    best
}
