use thiserror::Error;

/// Failure modes shared across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is not on the interface: |f(y)| = {residual:e}")]
    NotOnInterface { residual: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("energy drift {drift:e} exceeds tolerance")]
    EnergyDriftExceeded { drift: f64 },
    #[error("glancing interface hit (|xi_N| = {xi_n:e}) cannot branch")]
    GlancingBranch { xi_n: f64 },
    #[error("glancing event at t = {t} on a trajectory that requires transversal hits")]
    GlancingEvent { t: f64 },
    #[error("coincident interface events at t = {t}")]
    CoincidentEvents { t: f64 },
    #[error("itinerary exhausted after {used} hyperbolic hits")]
    ItineraryExhausted { used: usize },
    #[error("itinerary has {remaining} unconsumed entries")]
    ItineraryUnconsumed { remaining: usize },
    #[error("branch explosion: more than {cap} leaves")]
    BranchExplosion { cap: usize },
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("degenerate Jacobian in Newton solve")]
    DegenerateJacobian,
    #[error("orbit passes within the near-glancing band")]
    NearGlancing,
    #[error("continuation stalled at E = {energy}")]
    ContinuationStall { energy: f64 },
    #[error("endpoint conjugate: det d_eta X = {det:e}")]
    ConjugateEndpoint { det: f64 },
    #[error("conjugate point of tangential contact at t = {t}")]
    TangentialConjugate { t: f64 },
    #[error("base point is conjugate to itself along the orbit")]
    SelfConjugate,
    #[error("degenerate orbit: eigenvalue 1 has multiplicity {multiplicity}")]
    DegenerateOrbit { multiplicity: usize },
    #[error("degenerate stationary point in composition")]
    DegenerateStationaryPoint,
    #[error("period {period} lies outside the time window support")]
    WindowMismatch { period: f64 },
    #[error("domain wall too close to a classical turning point")]
    WallTooClose,
    #[error("eigenvalues did not converge under grid refinement (drift {drift:e})")]
    NotConverged { drift: f64 },
    #[error("spectral-sum and Fourier-side traces disagree (relative {relative:e})")]
    ConventionMismatch { relative: f64 },
    #[error("stiff scattering integration failed")]
    StiffnessFailure,
    #[error("invalid scattering boundary condition: {0}")]
    BoundaryConditionInvalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
