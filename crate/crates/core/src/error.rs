use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Validation,
    ResourceCap,
}

#[derive(Debug, Error)]
pub enum Error {
    /// A structured document did not match its schema.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    /// A line-oriented document (INP, CSV) could not be read.
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error(
        "mass balance violated at junction `{junction}` in hydraulic step {step}: \
         residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    MassBalance {
        junction: String,
        step: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error(
        "CFL condition violated on pipe `{pipe}` in hydraulic step {step}: Courant number \
         {courant:.4} > 1; use a smaller dt_wq"
    )]
    Cfl {
        pipe: String,
        step: usize,
        courant: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    Asymmetric { asymmetry: f64 },

    #[error(
        "brute-force enumeration needs {combinations} subsets, above the cap of {cap}; \
         use greedy placement"
    )]
    CapExceeded { combinations: u128, cap: u128 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::CapExceeded { .. } => ErrorClass::ResourceCap,
            Error::Context { source, .. } => source.class(),
            _ => ErrorClass::Validation,
        }
    }
}
