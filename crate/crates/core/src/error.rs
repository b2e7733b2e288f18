use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("{0}: empty recording")]
    EmptyRecording(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ambiguous labeling: early span {early_s} s and late span {late_s} s overlap within {total_s} s")]
    AmbiguousLabeling { early_s: f64, late_s: f64, total_s: f64 },

    #[error("degenerate window at offset {offset_s} s: {reason}")]
    DegenerateWindow { offset_s: f64, reason: &'static str },

    #[error("{count} of {total} windows are degenerate (offsets {}); more than 1% aborts the run", offsets.iter().map(|o| format!("{o} s")).collect::<Vec<_>>().join(", "))]
    TooManyDegenerate {
        count: usize,
        total: usize,
        offsets: Vec<f64>,
    },

    #[error("window of {len} samples too short for decomposition level {level}")]
    WindowTooShort { len: usize, level: u32 },

    #[error("unknown mother filter '{0}'")]
    UnknownFilter(String),

    #[error("feature schema mismatch: missing [{}], extra [{}]", missing.join(", "), extra.join(", "))]
    SchemaMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("constant feature '{0}' cannot be standardized")]
    ConstantFeature(String),

    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),

    #[error("class {class} has {count} rows, need at least 2")]
    ClassTooSmall { class: u8, count: usize },

    #[error("SMO did not converge after {iterations} iterations (classes {class_a}/{class_b}, violating pair {i}/{j}, gap {gap:e})")]
    NonConvergence {
        class_a: u8,
        class_b: u8,
        iterations: usize,
        i: usize,
        j: usize,
        gap: f64,
    },

    #[error("model file: {0}")]
    Model(String),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("config hash mismatch: artifact {artifact} was produced with {found}, current config is {expected} (use --force to override)")]
    ConfigHashMismatch {
        artifact: PathBuf,
        found: String,
        expected: String,
    },
}

impl Error {
    /// Process exit status: 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::UnknownFilter(_)
            | Error::ConfigHashMismatch { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
