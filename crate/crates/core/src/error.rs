use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry in {context}")]
    NonFinite { context: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("matrix is not Hermitian (asymmetry {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("matrix is near-singular (smallest singular value {sigma_min:e})")]
    NearSingular { sigma_min: f64 },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    /// A or D block of a unitary is (near-)singular, so the point lies outside
    /// the coordinate chart.
    #[error("chart breakdown: diagonal block has smallest singular value {sigma_min:e}")]
    ChartBreakdown { sigma_min: f64 },

    #[error("Hamiltonian sample at t = {t} is not Hermitian (asymmetry {residual:e})")]
    NonHermitianSample { t: f64, residual: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("expected a real quantity, imaginary residue {residue:e}")]
    NonRealResult { residue: f64 },

    #[error("phase undefined: endpoint overlap {overlap:e} vanishes")]
    UndefinedPhase { overlap: f64 },

    #[error("curve is not closed (endpoint gap {gap:e})")]
    NotClosed { gap: f64 },

    #[error("time {t} is not on the trajectory grid")]
    OffGrid { t: f64 },

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(
    context: impl Into<String>,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context: context.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
