use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("csv error: {0}")]
    Csv(String),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column '{column}': blank cell (missing values are not supported)")]
    BlankCell { row: usize, column: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate week {0}")]
    DuplicateWeek(u32),

    #[error("gap in week sequence: week {missing} is missing")]
    WeekGap { missing: u32 },

    #[error("weeks must increase by one; week {found} follows week {previous}")]
    WeekOrder { previous: u32, found: u32 },

    #[error("invalid value in row for week {week}: {reason}")]
    InvalidValue { week: u32, reason: String },

    #[error("series too short: {found} observations, at least {required} required")]
    TooShort { found: usize, required: usize },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("week {week} is outside the series range {first}..={last}")]
    WeekOutOfRange { week: u32, first: u32, last: u32 },

    #[error("effective changepoint week {effective} precedes the first week {first}")]
    ChangepointBeforeStart { effective: u32, first: u32 },

    #[error("design is rank deficient: column '{0}' is linearly dependent on earlier columns")]
    RankDeficient(String),

    #[error("not enough observations: n = {n}, parameters = {k}")]
    InsufficientObservations { n: usize, k: usize },

    #[error("residual sum of squares is zero; the Gaussian log-likelihood is unbounded")]
    ZeroResidualVariance,

    #[error("design columns do not match the fitted model: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("design does not declare intervention columns")]
    MissingInterventionColumns,

    #[error("all residuals are zero")]
    ZeroResiduals,

    #[error("series has zero variance")]
    ConstantSeries,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimizer did not converge after {iterations} iterations (scaled gradient {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("negative likelihood ratio statistic {0}: the larger model fits worse, the optimizer likely failed")]
    NegativeLambda(f64),

    #[error("no candidate model passed the residual whiteness check")]
    NoAdmissibleModel,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
