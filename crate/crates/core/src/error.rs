use thiserror::Error;

/// Failure of a single dynamical step. Estimators drop the affected
/// trajectory and count it by kind.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SystemError {
    #[error("state outside the domain of the map: {coordinate} ({detail})")]
    Domain { coordinate: String, detail: String },
    #[error("no collision within free-path budget {limit} (flight reached {reached})")]
    HorizonViolation { limit: f64, reached: f64 },
    #[error("trapped orbit: no collision within {events} integration steps")]
    Trapped { events: u64 },
    #[error("grazing collision (|phi| within tolerance of pi/2)")]
    Grazing,
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("root search stalled: {0}")]
    Stall(String),
    #[error("displacement leaves the lattice: {0}")]
    LatticeExit(String),
    #[error("operation not supported by this system: {0}")]
    Unsupported(&'static str),
}

impl SystemError {
    /// Short stable label used when tallying dropped trajectories.
    pub fn kind(&self) -> &'static str {
        match self {
            SystemError::Domain { .. } => "domain",
            SystemError::HorizonViolation { .. } => "horizon",
            SystemError::Trapped { .. } => "trapped",
            SystemError::Grazing => "grazing",
            SystemError::Integration(_) => "integration",
            SystemError::Stall(_) => "stall",
            SystemError::LatticeExit(_) => "lattice_exit",
            SystemError::Unsupported(_) => "unsupported",
        }
    }
}

/// Errors raised by estimators, oracles and observables.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sampler efficiency too low: {0}")]
    SamplerEfficiency(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
