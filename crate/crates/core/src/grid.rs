use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform periodic collocation grid on [0, 2pi).
///
/// Nodes are y_j = 2*pi*j/n and the integer mode set is m in [-n/2, n/2).
/// The quadrature weight is 2*pi/n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub const DEFAULT_N: usize = 256;

    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        Ok(Grid { n })
    }

    pub fn default_resolution() -> Self {
        Grid { n: Self::DEFAULT_N }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight 2*pi/n of the trapezoidal (= spectrally exact) rule.
    #[inline]
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }

    /// Integer frequency of coefficient slot `i` (FFT storage order).
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n).map(move |i| self.mode(i))
    }

    /// Coefficient slot of integer frequency `m`, if resolvable.
    pub fn index_of_mode(&self, m: i64) -> Option<usize> {
        let half = self.n as i64 / 2;
        if m >= half || m < -half {
            return None;
        }
        Some(if m >= 0 { m as usize } else { (m + self.n as i64) as usize })
    }

    /// Largest resolvable |m| (= n/2 - 1 on the positive side).
    pub fn max_mode(&self) -> i64 {
        self.n as i64 / 2 - 1
    }
}
