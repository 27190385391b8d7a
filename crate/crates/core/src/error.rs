use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input shorter than the minimum the operation needs.
    EmptyInput(&'static str),
    /// Shapes or lengths that must agree do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A value outside its documented domain.
    InvalidValue { what: &'static str, detail: String },
    /// An alignment token reaches past the end of the feature matrix.
    AlignmentOutOfRange { end_frame: usize, frames: usize },
    /// NaN or infinity showed up where only finite values are allowed.
    NonFinite(&'static str),
    /// No negative audio, so false alarms per hour is undefined.
    ZeroDuration,
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected}, found {found}"),
            Error::InvalidValue { what, detail } => write!(f, "invalid {what}: {detail}"),
            Error::AlignmentOutOfRange { end_frame, frames } => write!(
                f,
                "alignment token ends at frame {end_frame} but utterance has {frames} frames"
            ),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::ZeroDuration => write!(f, "total negative duration is zero"),
        }
    }
}

impl core::error::Error for Error {}
