use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("poses share no jointly visible joint")]
    NoCommonVisibleJoints,

    #[error("pose sequences share no frame")]
    NoOverlap,

    #[error("skeleton mismatch: expected {expected} joints, found {found}")]
    SkeletonMismatch { expected: usize, found: usize },

    #[error("invalid bounding box {w}x{h}: width and height must be positive")]
    InvalidBox { w: f64, h: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid tracklet {source_id}: {reason}")]
    InvalidTracklet { source_id: String, reason: String },

    #[error("schedule violation: {0}")]
    ScheduleViolation(String),

    #[error("track {track_id} has no hypotheses at frame {frame}")]
    EmptyHypotheses { track_id: u64, frame: usize },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Malformed input records, as opposed to violated pipeline invariants.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
