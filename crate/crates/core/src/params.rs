use crate::error::{Error, Result};

/// Translation law of the shear profile sin(y - c t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TranslationLaw {
    /// Fixed speed c >= 0.
    Explicit(f64),
    /// Power law c = c0 * nu^ell with c0 > 0 and ell in (0, 1).
    PowerLaw { c0: f64, ell: f64 },
}

/// Physical parameters of one per-mode simulation of
/// d/dt theta + i alpha k sin(y - c t) theta + nu k^2 theta = nu d^2/dy^2 theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub alpha: f64,
    pub nu: f64,
    pub k: i32,
    pub c_law: TranslationLaw,
}

impl FlowParams {
    pub fn new(alpha: f64, nu: f64, k: i32, c_law: TranslationLaw) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        // alpha = 0 is admitted as the pure-diffusion control used by the
        // heat-comparison and sweep baselines.
        if !(alpha >= 0.0) {
            return Err(Error::OutOfRange { name: "alpha", value: alpha, range: "[0, inf)" });
        }
        if !(nu >= 0.0) {
            return Err(Error::OutOfRange { name: "nu", value: nu, range: "[0, inf)" });
        }
        match c_law {
            TranslationLaw::Explicit(c) if !(c >= 0.0) => {
                return Err(Error::OutOfRange { name: "c", value: c, range: "[0, inf)" });
            }
            TranslationLaw::PowerLaw { c0, ell } => {
                if !(c0 > 0.0) {
                    return Err(Error::OutOfRange { name: "c0", value: c0, range: "(0, inf)" });
                }
                if !(ell > 0.0 && ell < 1.0) {
                    return Err(Error::OutOfRange { name: "ell", value: ell, range: "(0, 1)" });
                }
            }
            _ => {}
        }
        Ok(FlowParams { alpha, nu, k, c_law })
    }

    /// Stationary-shear configuration (c = 0).
    pub fn stationary(alpha: f64, nu: f64, k: i32) -> Result<Self> {
        Self::new(alpha, nu, k, TranslationLaw::Explicit(0.0))
    }

    /// Resolved translation speed; c0 * nu^ell exactly under a power law.
    pub fn speed(&self) -> f64 {
        match self.c_law {
            TranslationLaw::Explicit(c) => c,
            TranslationLaw::PowerLaw { c0, ell } => c0 * self.nu.powf(ell),
        }
    }

    #[inline]
    pub fn abs_k(&self) -> f64 {
        self.k.unsigned_abs() as f64
    }

    /// alpha * |k|, the advective frequency that sets the scaled time.
    #[inline]
    pub fn advective_rate(&self) -> f64 {
        self.alpha * self.abs_k()
    }

    pub fn scaled(&self) -> ScaledParams {
        let ak = self.advective_rate();
        let (varsigma_k, ell) = match self.c_law {
            TranslationLaw::PowerLaw { c0, ell } => (c0 * ak.powf(ell - 1.0), ell),
            TranslationLaw::Explicit(_) => (0.0, f64::NAN),
        };
        ScaledParams {
            mu: self.nu / ak,
            varsigma: self.speed() / ak,
            varsigma_k,
            ell,
        }
    }
}

/// Moving-frame parameters: mu = nu/(alpha|k|), varsigma = c/(alpha|k|).
///
/// Under a power law the rescaling preserves the exponent:
/// varsigma = varsigma_k * mu^ell with varsigma_k = c0 (alpha|k|)^{ell-1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    pub mu: f64,
    pub varsigma: f64,
    pub varsigma_k: f64,
    pub ell: f64,
}

impl ScaledParams {
    /// Direct construction for moving-frame runs that never reference a lab
    /// configuration.
    pub fn direct(mu: f64, varsigma: f64) -> Self {
        ScaledParams { mu, varsigma, varsigma_k: 0.0, ell: f64::NAN }
    }

    pub fn power_law(mu: f64, varsigma_k: f64, ell: f64) -> Self {
        ScaledParams { mu, varsigma: varsigma_k * mu.powf(ell), varsigma_k, ell }
    }
}
