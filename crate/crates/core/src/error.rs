use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building series, windows and statistics.
///
/// Variant names double as the rule names reported by the CLI, so keep them
/// stable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("EmptyInput: no data")]
    EmptyInput,

    #[error("Malformed: line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("NonPositivePrice: line {line}: price {price} must be > 0")]
    NonPositivePrice { line: usize, price: f64 },

    #[error("NonPositiveVolume: line {line}: volume {volume} must be > 0")]
    NonPositiveVolume { line: usize, volume: f64 },

    #[error("ValueMismatch: line {line}: declared value {declared} but price*volume = {computed}")]
    ValueMismatch {
        line: usize,
        declared: f64,
        computed: f64,
    },

    #[error("NonUniformSpacing: line {line}: step {step} differs from grid spacing {epsilon}")]
    NonUniformSpacing { line: usize, step: i64, epsilon: i64 },

    #[error("DuplicateTimestamp: line {line}: time {t} repeats the previous row")]
    DuplicateTimestamp { line: usize, t: i64 },

    #[error("UnsortedTimes: line {line}: time {t} precedes the previous row")]
    UnsortedTimes { line: usize, t: i64 },

    #[error("EmptyWindow: no ticks in [{from}, {to}]")]
    EmptyWindow { from: i64, to: i64 },

    #[error("LagNotOnGrid: lag {lag} is not a multiple of grid spacing {epsilon}")]
    LagNotOnGrid { lag: i64, epsilon: i64 },

    #[error("GridMismatch: {0}")]
    GridMismatch(String),

    #[error("MissingHistory: tick at time {t} is not in the series")]
    MissingHistory { t: i64 },

    #[error("LengthMismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("DegenerateDenominator: {0:e}")]
    DegenerateDenominator(f64),

    #[error("NonPositiveInvestment: index {index}")]
    NonPositiveInvestment { index: usize },

    #[error("NonPositiveInput: index {index}")]
    NonPositiveInput { index: usize },

    #[error("UnnormalizedWeights: weights sum to {0}")]
    UnnormalizedWeights(f64),

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Short rule name, e.g. `NonUniformSpacing`.
    pub fn rule(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::Malformed { .. } => "Malformed",
            Error::NonPositivePrice { .. } => "NonPositivePrice",
            Error::NonPositiveVolume { .. } => "NonPositiveVolume",
            Error::ValueMismatch { .. } => "ValueMismatch",
            Error::NonUniformSpacing { .. } => "NonUniformSpacing",
            Error::DuplicateTimestamp { .. } => "DuplicateTimestamp",
            Error::UnsortedTimes { .. } => "UnsortedTimes",
            Error::EmptyWindow { .. } => "EmptyWindow",
            Error::LagNotOnGrid { .. } => "LagNotOnGrid",
            Error::GridMismatch(_) => "GridMismatch",
            Error::MissingHistory { .. } => "MissingHistory",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DegenerateDenominator(_) => "DegenerateDenominator",
            Error::NonPositiveInvestment { .. } => "NonPositiveInvestment",
            Error::NonPositiveInput { .. } => "NonPositiveInput",
            Error::UnnormalizedWeights(_) => "UnnormalizedWeights",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
