use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// Scattering angle requested at ξ = 0; callers must take the limit path.
    #[error("degenerate frequency: the scattering angle is undefined at xi = 0")]
    DegenerateFrequency,

    #[error(
        "partial-wave sum not converged at l_max = {ell_max} (x = {x}, cos_theta = {cos_theta})"
    )]
    Truncation {
        ell_max: usize,
        x: f64,
        cos_theta: f64,
    },

    #[error("invalid quadrature configuration: {0}")]
    Config(String),

    /// The round-trip block is not a contraction (factorization of 1 - M failed).
    #[error("nonphysical kernel at xi = {xi}, m = {m}: {detail}")]
    NonPhysical { xi: f64, m: usize, detail: String },

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("finite-difference derivative did not converge: {0}")]
    Stencil(String),

    #[error("quadrature budget exceeded: estimate {estimate} +/- {error}")]
    Budget { estimate: f64, error: f64 },

    #[error("rank-deficient fit design: {0}")]
    RankDeficient(String),

    #[error("I/O: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }
}
