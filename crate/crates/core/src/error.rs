use thiserror::Error;

/// Invalid parameter values or mismatched configuration pieces.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("frame is {got_w}x{got_h} but the image processing expects {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
}

impl ConfigError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Problems found while reading or validating a track description.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no segments")]
    NoSegments,
    #[error("segments {prev} and {next} do not meet (line {line}): gap of {gap:.3e} m")]
    Discontinuity {
        prev: usize,
        next: usize,
        line: usize,
        gap: f64,
    },
    #[error("missing marker")]
    MissingMarker,
    #[error("marker center is {gap:.3e} m away from the final segment endpoint")]
    MarkerNotAtEnd { gap: f64 },
    #[error("invalid track: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
