use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {0} out of range 1..=4")]
    InvalidSite(usize),

    #[error("hopping requires two distinct sites, got site {0} twice")]
    SameSite(usize),

    #[error("Fock state {0:?} does not belong to the N={1} sector")]
    StateNotInBasis([u32; 4], u32),

    #[error("operands live in different Fock bases (N={0} vs N={1})")]
    BasisMismatch(u32, u32),

    #[error("impossible outcome: occupation {outcome} at site {site} has zero probability")]
    ImpossibleOutcome { site: usize, outcome: u32 },

    #[error("resonant-regime formula is singular: |M-P| = {0}, need at least 2")]
    SingularResonance(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bands unresolved: {0}")]
    BandsUnresolved(String),

    #[error("least-squares fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("no integrable point in bracket [{lo}, {hi}] rad/s: residuals {f_lo} and {f_hi} share a sign")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge after {iterations} iterations (bracket width {width})")]
    RootNotConverged { iterations: usize, width: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error}")]
    Quadrature { estimate: f64, error: f64 },
}

impl Error {
    /// True for failures of a numerical method, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BandsUnresolved(_)
                | Error::NoSignChange { .. }
                | Error::RootNotConverged { .. }
                | Error::Quadrature { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
