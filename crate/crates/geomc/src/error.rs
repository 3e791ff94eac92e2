use thiserror::Error;

/// Errors shared across the manifold, target, sampler, and diagnostics layers.
#[derive(Debug, Error)]
pub enum GmcError {
    /// A point failed its manifold constraint check.
    #[error("invalid point on {manifold}: {detail}")]
    InvalidPoint { manifold: String, detail: String },

    /// A vector is not tangent at the given point (or has the wrong length).
    #[error("invalid tangent vector on {manifold}: {detail}")]
    InvalidTangent { manifold: String, detail: String },

    /// Two operands have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter set fails validation (non-symmetric matrix, bad ordering, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input outside the supported domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No unique geodesic between the requested endpoints.
    #[error("degenerate geodesic: {0}")]
    DegenerateGeodesic(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Gradient evaluation produced non-finite components during a momentum kick.
    #[error("non-finite gradient during kick at q = {at}")]
    NonFiniteKick { at: String },

    /// A sample series is unusable for the requested diagnostic.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Requested operation is not defined for this manifold kind.
    #[error("unsupported operation for {manifold}: {detail}")]
    Unsupported { manifold: String, detail: String },
}
