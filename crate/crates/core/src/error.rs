use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("matrix is not Hurwitz (max real part {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("ill-conditioned matrix in {context} (condition number {condition:.3e})")]
    IllConditioned { context: &'static str, condition: f64 },

    #[error("residual {residual:.3e} above tolerance {tolerance:.1e} in {context}")]
    Residual {
        context: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("no stabilizing initial gain found: {0}")]
    InitialGain(String),

    #[error("Kleinman iteration did not converge within {iterations} iterations")]
    KleinmanNoConvergence { iterations: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid design: {0}")]
    Design(String),

    #[error("constraint channel {channel}: min and max branches both active")]
    Exclusivity { channel: usize },

    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },

    #[error("invalid simulation setup: {0}")]
    Simulation(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category used by the CLI and FFI layers.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NonFinite(_) => "non_finite",
            Error::EigenNoConvergence { .. }
            | Error::NotHurwitz { .. }
            | Error::Singular(_)
            | Error::IllConditioned { .. }
            | Error::Residual { .. }
            | Error::InitialGain(_)
            | Error::KleinmanNoConvergence { .. } => "numerical",
            Error::Model(_) => "model",
            Error::Design(_) => "design",
            Error::Exclusivity { .. } => "exclusivity",
            Error::Divergence { .. } | Error::Simulation(_) => "simulation",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
