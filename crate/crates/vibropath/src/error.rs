//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violates its documented range or two options conflict.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// Two channels cannot be combined (rate, length or metadata mismatch).
    #[error("incompatible channels: {0}")]
    IncompatibleChannels(String),

    /// A record is too short for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The excitation channel carries no usable energy.
    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    /// A tachometer signal could not be turned into a speed profile.
    #[error("corrupt tacho: {0}")]
    CorruptTacho(String),

    /// An order frequency leaves the analyzable band.
    #[error("out of band: order {order} at {rpm:.1} rpm maps to {frequency:.1} Hz, beyond {limit:.1} Hz")]
    OutOfBand {
        order: f64,
        rpm: f64,
        frequency: f64,
        limit: f64,
    },

    /// A chain has no transmissibility for the requested order.
    #[error("missing order: no transmissibility for order {order} in chain {path}")]
    MissingOrder { order: f64, path: String },

    /// Two frequency or rpm grids do not line up.
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    /// An operation produced no valid bins at all.
    #[error("empty result: {0}")]
    EmptyResult(String),

    /// The dataset lacks a recording or channel the analysis needs.
    #[error("missing input: {0}")]
    MissingInput(String),

    /// A file referenced by a manifest does not exist.
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    /// A CSV file lacks a column the manifest names.
    #[error("bad column: file {file} has no column {column:?}")]
    BadColumn { file: String, column: String },

    /// A channel's unit does not match its declared role.
    #[error("unit mismatch: channel {channel:?} has unit {got:?}, role {role} expects {expected}")]
    UnitMismatch {
        channel: String,
        role: String,
        got: String,
        expected: String,
    },

    /// Two manifest channels share an id.
    #[error("duplicate channel id {0:?}")]
    DuplicateChannelId(String),

    /// The manifest violates its schema in some other way.
    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// A pipeline stage failed; wraps the underlying error with stage context.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap with pipeline stage context.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code class: 1 for input/configuration errors, 2 for
    /// errors arising during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfiguration(_)
            | Error::IncompatibleChannels(_)
            | Error::MissingInput(_)
            | Error::MissingFile(_)
            | Error::BadColumn { .. }
            | Error::UnitMismatch { .. }
            | Error::DuplicateChannelId(_)
            | Error::SchemaViolation(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 1,
            Error::InsufficientData(_)
            | Error::InsufficientExcitation(_)
            | Error::CorruptTacho(_)
            | Error::OutOfBand { .. }
            | Error::MissingOrder { .. }
            | Error::IncompatibleGrids(_)
            | Error::EmptyResult(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
