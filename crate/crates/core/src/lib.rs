//! Per-Fourier-mode pseudospectral solver and verification harness for the
//! advection-diffusion equation with the translating shear sin(y - c t).
//!
//! The crate integrates the per-mode equation in the lab and moving frames
//! with Strang splitting over exact substeps, evaluates the time-averaged
//! H^{-1} mixing functional and its critical-set geometry, instruments runs
//! with the hypocoercive energy machinery (coefficient schedule, ledger,
//! coercivity, energy identities, decay envelope, exponent constraints), and
//! ships batch drivers for the dissipation-time exponent sweep, inviscid
//! snapshot periodicity, and the fast-translation heat comparison.

pub mod checks;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod hypo;
pub mod mixing;
pub mod norms;
pub mod params;
pub mod solver;

pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::Grid;
pub use params::{FlowParams, ScaledParams, TranslationLaw};
pub use solver::{Frame, SolverConfig, Trajectory};
