use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Each variant maps to a stable machine-readable [`Error::code`], which the
/// CLI writes into `fit.json`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to zero and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("shape parameter {index} is not strictly positive ({value})")]
    NonPositiveAlpha { index: usize, value: f64 },
    #[error("composition entry {index} = {value} lies on or outside the simplex boundary")]
    BoundaryY { index: usize, value: f64 },
    #[error("argument {0} must be strictly positive")]
    NonPositiveArgument(f64),
    #[error("non-finite input to softmax or linear predictor")]
    NonFiniteInput,
    #[error("linear predictor spread {0} exceeds the softmax range")]
    SoftmaxRange(f64),
    #[error("precision overflowed to infinity (log precision {0})")]
    OverflowToInfinity(f64),
    #[error("precision must be strictly positive, got {0}")]
    NonPositiveTheta(f64),
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("categorical column `{0}` has fewer than two observed levels")]
    SingleLevelFactor(String),
    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("non-finite parameter vector or log density")]
    NonFiniteParameters,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("standard errors are unavailable: {0}")]
    MissingStdErrors(String),
    #[error("non-finite gradient during integration")]
    NonFiniteGradient,
    #[error("every chain diverged on every post-warmup transition")]
    AllChainsDiverged,
    #[error("chain {chain}: no finite initial point after {attempts} attempts")]
    NonFiniteInit { chain: usize, attempts: usize },
    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),
    #[error("entry {value} at row {row} is not strictly positive")]
    NonPositiveEntry { row: usize, value: f64 },
    #[error("at least two samples required, got {0}")]
    InsufficientSamples(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable identifier for serialized error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeEntry { .. } => "negative_entry",
            Error::ZeroRow { .. } => "zero_row",
            Error::Dimension(_) => "dimension_error",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonPositiveAlpha { .. } => "non_positive_alpha",
            Error::BoundaryY { .. } => "boundary_y",
            Error::NonPositiveArgument(_) => "non_positive_argument",
            Error::NonFiniteInput => "non_finite_input",
            Error::SoftmaxRange(_) => "softmax_range",
            Error::OverflowToInfinity(_) => "overflow_to_infinity",
            Error::NonPositiveTheta(_) => "non_positive_theta",
            Error::Syntax { .. } => "syntax_error",
            Error::UnknownColumn(_) => "unknown_column",
            Error::SingleLevelFactor(_) => "single_level_factor",
            Error::MissingValue { .. } => "missing_value",
            Error::NonFiniteParameters => "non_finite_parameters",
            Error::DegenerateData(_) => "degenerate_data",
            Error::MissingStdErrors(_) => "missing_std_errors",
            Error::NonFiniteGradient => "non_finite_gradient",
            Error::AllChainsDiverged => "all_chains_diverged",
            Error::NonFiniteInit { .. } => "non_finite_init",
            Error::InsufficientDraws(_) => "insufficient_draws",
            Error::NonPositiveEntry { .. } => "non_positive_entry",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::InvalidConfig(_) => "invalid_config",
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
