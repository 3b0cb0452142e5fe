use thiserror::Error;

/// Errors raised anywhere in the association pipeline.
#[derive(Debug, Error)]
pub enum GsuError {
    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("genotype column {0} has no observed entries")]
    ColumnUnusable(usize),

    #[error("invalid genotype value {value} at row {row}, column {col}")]
    InvalidGenotype { row: usize, col: usize, value: f64 },

    #[error("missing phenotype at row {row}, column {col}")]
    MissingPhenotype { row: usize, col: usize },

    #[error("bad weight: {0}")]
    BadWeight(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("covariate design matrix is not of full column rank")]
    SingularDesign,

    #[error("phenotype second-moment matrix is singular; supply gamma explicitly")]
    GammaSingular,

    #[error("all variant weights are zero")]
    DegenerateWeights,

    #[error("similarity matrix in state {found}, expected {expected}")]
    WrongState {
        expected: &'static str,
        found: &'static str,
    },

    #[error("adjusted similarity matrices were built from different projections")]
    ContextMismatch,

    #[error("correlation undefined: a centered similarity matrix is identically zero")]
    UndefinedCorrelation,

    #[error("null spectrum is degenerate (all eigenvalues zero)")]
    DegenerateSpectrum,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate alternative: {0}")]
    DegenerateAlternative(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty variant set: {0}")]
    EmptySet(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("overlapping gene ranges: {}", format_pairs(.0))]
    OverlappingGenes(Vec<(String, String)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}/{b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, GsuError>;
