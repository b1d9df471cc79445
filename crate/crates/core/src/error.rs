use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Truncation geometry violates `L >= R > 0` or the support-radius rule.
    #[error("invalid truncation geometry: {0}")]
    Geometry(String),

    #[error("collision kernel assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("invalid quadrature: {0}")]
    Quadrature(String),

    /// Weight-table entry did not settle under quadrature refinement.
    #[error("weight G({l:?}, {m:?}) changed by {change:e} under refinement (tolerance {tol:e})")]
    Precision {
        l: Vec<i64>,
        m: Vec<i64>,
        change: f64,
        tol: f64,
    },

    /// Operands live on different lattices or disagree in gPC order.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("non-finite state at t = {t}, L2 norm {l2}")]
    BlowUp { t: f64, l2: f64 },

    #[error("requested capability not resolvable: {0}")]
    Capability(String),

    #[error("reference solution rejected: {0}")]
    Reference(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("weight cache: {0}")]
    Cache(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
