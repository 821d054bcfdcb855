use thiserror::Error;

/// Errors raised anywhere in the simulator. The `Display` text starts with the
/// name of the module that detected the failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("numerics: singular matrix (pivot {pivot:.3e}, scale {scale:.3e})")]
    SingularMatrix { pivot: f64, scale: f64 },
    #[error("numerics: matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("numerics: matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },
    #[error("numerics: no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("numerics: Cayley transform denominator is singular")]
    SingularCayley,
    #[error("numerics: non-finite entry at index {index}")]
    NonFiniteEntry { index: usize },
    #[error("numerics: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid: bad geometry: {0}")]
    BadGeometry(String),
    #[error("grid: inconsistent spacing (hx = {hx}, hy = {hy})")]
    InconsistentSpacing { hx: f64, hy: f64 },
    #[error("grid: bad wave packet: {0}")]
    BadPacket(String),
    #[error("grid: non-finite potential value at node {index}")]
    NonFiniteValue { index: usize },
    #[error("grid: size mismatch (expected {expected}, found {found})")]
    SizeMismatch { expected: usize, found: usize },

    #[error("extensions: boundary map is not a contraction (sigma_max = {sigma_max:.12})")]
    NotContraction { sigma_max: f64 },
    #[error("extensions: singular boundary elimination (condition {condition:.3e})")]
    SingularElimination { condition: f64 },
    #[error("extensions: Hermitian part of beta is not PSD (eigenvalue {eigenvalue:.3e})")]
    BadBeta { eigenvalue: f64 },
    #[error("extensions: {0}")]
    Unsupported(String),

    #[error("propagator: time step must be positive and finite (dt = {0})")]
    InvalidTimeStep(f64),
    #[error("propagator: Crank-Nicolson step matrix is singular")]
    SingularStep,
    #[error("propagator: {0}")]
    InvalidArgument(String),

    #[error("detection: trajectory carries no midpoint traces")]
    MissingTraces,
    #[error("detection: {n} interior unknowns exceed the dense POVM limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("dtn: eta = {eta} lies within {distance:.3e} of the Dirichlet/Neumann spectrum")]
    EtaTooClose { eta: f64, distance: f64 },
    #[error("dtn: lambda = {lambda} is resonant with the Dirichlet operator")]
    ResonantLambda { lambda: f64 },
    #[error("quadruple: orientation self-test failed ({0})")]
    Orientation(String),
}

impl Error {
    /// Module that raised the error, as used in CLI diagnostics.
    pub fn module(&self) -> &'static str {
        let text = self.to_string();
        match text.split(':').next() {
            Some("numerics") => "numerics",
            Some("grid") => "grid",
            Some("extensions") => "extensions",
            Some("propagator") => "propagator",
            Some("detection") => "detection",
            Some("dtn") => "dtn",
            Some("quadruple") => "quadruple",
            _ => "unknown",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
