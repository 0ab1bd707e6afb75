use thiserror::Error;

/// Per-step record kept by cyclic reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub h: usize,
    pub norm_minus: f64,
    pub norm_plus: f64,
    pub max_offdiag_rank: usize,
    pub elapsed_seconds: f64,
}

impl StepRecord {
    /// `h norm_Aminus norm_Aplus max_offdiag_rank elapsed_seconds`
    pub fn telemetry_line(&self) -> String {
        format!(
            "{} {:.6e} {:.6e} {} {:.6}",
            self.h, self.norm_minus, self.norm_plus, self.max_offdiag_rank, self.elapsed_seconds
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("convergence failure in {0}")]
    ConvergenceFailure(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bad off-diagonal block index: {0}")]
    BadBlockIndex(String),

    #[error("cyclic reduction breakdown at step {step}: {source}")]
    Breakdown {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cyclic reduction did not converge in {} steps", history.len())]
    NoConvergence { history: Vec<StepRecord> },

    #[error("Laurent coefficients aliased: ‖H_J‖/‖H_0‖ = {ratio:e}")]
    AliasWarning { ratio: f64 },

    #[error("residual {residual:e} exceeds tolerance {tolerance:e} ({what})")]
    ResidualTooLarge {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("spectral radius {radius} of {what} is not below one")]
    SpectralRadiusViolation { what: String, radius: f64 },

    #[error("block count {n} is not of the form 2^k - 1 and the dense fallback is disabled")]
    UnsupportedSize { n: usize },

    #[error("coefficient is not tridiagonal Toeplitz: {0}")]
    NotToeplitz(String),

    #[error("the unit circle does not split the eigenvalues (nearest modulus {modulus}); rescale A1 and A-1 by alpha and 1/alpha")]
    NoSplitting { modulus: f64 },

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("pole collides with a point of E at {0}")]
    PoleCollision(f64),

    #[error("eigenvector matrix of {what} has condition number {kappa:e}")]
    NotDiagonalizable { what: String, kappa: f64 },

    #[error("problem generation failed: {0}")]
    GenerationFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::ConvergenceFailure(_) => "convergence_failure",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::BadBlockIndex(_) => "bad_block_index",
            Error::Breakdown { .. } => "breakdown",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AliasWarning { .. } => "alias_warning",
            Error::ResidualTooLarge { .. } => "residual_too_large",
            Error::SpectralRadiusViolation { .. } => "spectral_radius_violation",
            Error::UnsupportedSize { .. } => "unsupported_size",
            Error::NotToeplitz(_) => "not_toeplitz",
            Error::NoSplitting { .. } => "no_splitting",
            Error::DomainError(_) => "domain_error",
            Error::PoleCollision(_) => "pole_collision",
            Error::NotDiagonalizable { .. } => "not_diagonalizable",
            Error::GenerationFailure(_) => "generation_failure",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Attach the CR step index to a solver failure.
    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::Breakdown { .. } => e,
            other => Error::Breakdown {
                step,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
