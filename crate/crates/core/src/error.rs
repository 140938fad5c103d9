use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    #[error("quadrature did not converge (estimate {estimate:.6e}, error {error:.3e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("singular jacobian at pivot {pivot}")]
    SingularJacobian { pivot: usize },

    #[error("spatial resonance: far-field closure factor {closure:.3e}, condition estimate {condition:.3e}")]
    ResonanceDetected { closure: f64, condition: f64 },

    #[error("pushed decay rate {eta:.6} has merged with the linear rate {eta_lin:.6}")]
    DegenerateDecay { eta: f64, eta_lin: f64 },

    #[error("no sign change of a on [{lo}, {hi}] (a = {a_lo:.3e}, {a_hi:.3e})")]
    NoBracket { lo: f64, hi: f64, a_lo: f64, a_hi: f64 },

    #[error("ill-conditioned least-squares problem: {0}")]
    IllConditioned(String),

    #[error("eigensolver failure: {0}")]
    EigSolverFailure(String),

    #[error("far-field window unusable: {0}")]
    Window(String),
}

impl Error {
    /// Short machine-readable tag, used in CSV status columns.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::Domain(_) => "domain",
            Error::NewtonDiverged { .. } => "newton_diverged",
            Error::Convergence(_) => "convergence",
            Error::Quadrature { .. } => "quadrature",
            Error::SingularJacobian { .. } => "singular_jacobian",
            Error::ResonanceDetected { .. } => "resonance",
            Error::DegenerateDecay { .. } => "degenerate_decay",
            Error::NoBracket { .. } => "no_bracket",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::EigSolverFailure(_) => "eig_failure",
            Error::Window(_) => "window",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
