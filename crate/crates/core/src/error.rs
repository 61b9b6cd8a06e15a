use thiserror::Error;

/// Errors produced by synthesis, analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue computation did not converge")]
    EigenFailure,

    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("ill-conditioned invariant subspace basis (reciprocal condition {rcond:.3e})")]
    Conditioning { rcond: f64 },

    #[error("{what} is not stable (spectral abscissa {abscissa:.6e})")]
    Unstable { what: String, abscissa: f64 },

    #[error("infeasible at gamma = {gamma}: {reason}")]
    Infeasible { gamma: f64, reason: Infeasibility },

    #[error("no feasible gamma found below {cap}")]
    NoFeasibleGamma { cap: f64 },

    #[error("ill-posed interconnection: I - D_G D_K is singular")]
    AlgebraicLoop,

    #[error("singular at frequency {omega} rad/s (pole on the imaginary axis)")]
    SingularFrequency { omega: f64 },

    #[error("signals are not orthogonal: shared frequency {omega} rad/s")]
    NotOrthogonal { omega: f64 },

    #[error("invalid signal: {0}")]
    Signal(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which H-infinity feasibility condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    /// The control Riccati equation has no stabilizing solution.
    ControlRiccati,
    /// The filter Riccati equation has no stabilizing solution.
    FilterRiccati,
    /// A stabilizing solution exists but is not positive semidefinite.
    ControlNotPsd,
    FilterNotPsd,
    /// Coupling condition rho(P1 P2) < gamma^2 violated.
    SpectralRadius,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Infeasibility::ControlRiccati => "control Riccati equation has no stabilizing solution",
            Infeasibility::FilterRiccati => "filter Riccati equation has no stabilizing solution",
            Infeasibility::ControlNotPsd => "control Riccati solution is not positive semidefinite",
            Infeasibility::FilterNotPsd => "filter Riccati solution is not positive semidefinite",
            Infeasibility::SpectralRadius => "spectral radius of P1 P2 is not below gamma^2",
        };
        f.write_str(s)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
