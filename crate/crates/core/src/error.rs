use thiserror::Error;

/// Errors raised by the matrix kernel and the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller violated an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("support error: {0}")]
    Support(String),

    #[error("scan exhausted: no feasible w with |w| <= {radius_cap}")]
    ScanExhausted { radius_cap: f64 },

    #[error("degenerate input diagonals: 2x2 system determinant {det:e}")]
    DegenerateDiagonals { det: f64 },

    #[error("coefficient extraction failed: {what} (worst residual {residual:e})")]
    Extraction { what: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
