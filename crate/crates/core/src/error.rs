use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: negative confidence {value}")]
    NegativeConfidence { line: usize, value: f64 },

    #[error("symbol `{symbol}` appears more than once in one rule")]
    DuplicateSymbol { symbol: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("symbol id {id} is out of range for a table of {len} symbols")]
    SymbolOutOfRange { id: usize, len: usize },

    #[error("malformed DNF: {0}")]
    MalformedDnf(String),

    #[error("hidden symbol `{0}` is used but has no defining rule")]
    UndefinedHidden(String),

    #[error("cyclic definition through hidden symbol `{0}`")]
    CyclicHidden(String),

    #[error("hidden symbol `{0}` occurs negatively; only Horn-style chaining can be eliminated")]
    NonHornHidden(String),

    #[error("empty conjunction cannot be compiled into a hidden unit")]
    EmptyConjunction,

    #[error("pooling rule has no disjuncts")]
    EmptyPool,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("target visible {0} is also clamped")]
    TargetClamped(usize),

    #[error("enumeration over {0} free variables is too large")]
    EnumerationTooLarge(usize),

    #[error("training data is empty")]
    EmptyData,

    #[error("grounding error: {0}")]
    Grounding(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },

    #[error("no counterexample: the model satisfies the equivalence at this assignment")]
    NoFailure,

    #[error("{path}:{line}: {message}")]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model format: {0}")]
    Format(String),

    #[error("{0}")]
    Query(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Config(#[from] toml::de::Error),
}
