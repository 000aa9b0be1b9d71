use thiserror::Error;

/// Errors surfaced by solver, mixing, hypo and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wavenumber k must be nonzero (the scalar is mean-free in x)")]
    ZeroWavenumber,

    #[error("grid size {0} must be a power of two and at least 16")]
    BadGridSize(usize),

    #[error("grids do not match: {0} vs {1} points")]
    GridMismatch(usize, usize),

    #[error("{name} = {value} outside admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("operation requires nu = 0 but nu = {0}")]
    RequiresInviscid(f64),

    #[error("trajectory does not cover [{0}, {1}]")]
    TrajectoryTooShort(f64, f64),

    #[error("regression needs at least 3 strictly positive points, got {0}")]
    BadFitInput(usize),

    #[error("operation requires uniformly spaced snapshots")]
    NonUniformSampling,

    #[error("norm never dropped below threshold: last ratio {last_ratio} at t = {t_end}")]
    DissipationNotFound { last_ratio: f64, t_end: f64 },

    #[error("initial datum must be mean-free in x (mode k = 0 present)")]
    NotMeanFree,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
