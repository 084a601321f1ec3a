use thiserror::Error;

/// Errors raised by the bound, state and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The projected bound is infinite: the combination vector leaves the
    /// support of the Fisher matrix.
    #[error("combination is not estimable: Fisher information vanishes along it")]
    Unestimable,

    #[error("matrix is not symmetric (|h_lr - h_rl| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("covariance matrix is not physical (min eigenvalue of V + iΩ/2 is {0:e})")]
    NonPhysicalState(f64),

    #[error("state has nonzero displacement (max |d| = {0:e})")]
    NonzeroDisplacement(f64),

    #[error("mode {mode} out of range for a {modes}-mode state")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("expected a {expected}-mode state, got {got} modes")]
    WrongModeCount { expected: usize, got: usize },

    #[error("determinant has imaginary residue {0:e}")]
    ComplexResidue(f64),

    #[error("fidelity {0} outside [0, 1]")]
    FidelityOutOfRange(f64),

    #[error("finite-difference step too large: relative residual {0:e}")]
    StepTooLarge(f64),

    #[error("photon-number cutoff too small: truncated mass {tail:e} exceeds {tol:e}")]
    CutoffTooSmall { tail: f64, tol: f64 },

    #[error("truncated tail mass {tail:e} exceeds sampling limit {tol:e}")]
    TailTooLarge { tail: f64, tol: f64 },

    #[error("likelihood is degenerate: every outcome is (0, 0)")]
    DegenerateLikelihood,
}

pub type Result<T> = std::result::Result<T, Error>;
