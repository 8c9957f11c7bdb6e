use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A finite-difference stencil does not fit on the grid.
    #[error("stencil of half-width {half_width} for derivative order {order} needs more than {n_ax} points per axis")]
    Sizing { order: usize, half_width: usize, n_ax: usize },

    #[error("metric is degenerate at node {node}: smallest eigenvalue {min_eig:e} (threshold {threshold:e})")]
    Degenerate { node: usize, min_eig: f64, threshold: f64 },

    /// A tracked map is not a local diffeomorphism.
    #[error("map folds at node {node}: Jacobian determinant {det:e}")]
    Fold { node: usize, det: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// The requested time scale cannot be resolved on the grid.
    #[error("under-resolved: {0}")]
    Resolution(String),

    /// A numerical diagnostic failed (e.g. no admissible Gaussian bound).
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::Invalid(msg.into())
    }
}
