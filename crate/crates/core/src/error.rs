use std::fmt;
use std::io;

use thiserror::Error;

use crate::change::RankMode;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AstError {
    #[error("token sequence item {index} is empty")]
    EmptyItem { index: usize },
}

/// A generic tree document does not follow the schema.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("schema error at {path}: {reason}")]
pub struct SchemaError {
    /// JSON path of the offending element, e.g. `$.children[2].token`.
    pub path: String,
    pub reason: String,
}

/// Location and message of the first parse failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at {diagnostic}")]
pub struct ParseError {
    pub diagnostic: ParseDiagnostic,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChangeError {
    #[error("root-path sets use different rank modes ({reference} vs {target})")]
    ModeMismatch {
        reference: RankMode,
        target: RankMode,
    },
    #[error("root paths do not share a common root node")]
    InconsistentRoots,
}

#[derive(Debug, Error)]
pub enum TokensError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document-frequency fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("vocabulary file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training corpus has {distinct} distinct term(s); at least 2 are required")]
    DegenerateVocabulary { distinct: usize },
    #[error("invalid embedding configuration: {0}")]
    InvalidConfig(String),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("record {record_id}: {source}")]
    Parse {
        record_id: String,
        #[source]
        source: ParseError,
    },
    #[error("record {record_id}: expected exactly one method, found {found}")]
    NotSingleMethod { record_id: String, found: usize },
    #[error("record {record_id}: both pre and post sources are absent")]
    EmptyRecord { record_id: String },
    #[error("representation mode {0} requires an embedding model")]
    MissingModel(crate::features::Representation),
}

impl FeatureError {
    pub fn record_id(&self) -> Option<&str> {
        match self {
            FeatureError::Parse { record_id, .. }
            | FeatureError::NotSingleMethod { record_id, .. }
            | FeatureError::EmptyRecord { record_id } => Some(record_id),
            FeatureError::MissingModel(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("feature width mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Any error produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Change(#[from] ChangeError),
    #[error(transparent)]
    Tokens(#[from] TokensError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
