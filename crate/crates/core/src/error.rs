use thiserror::Error;

/// Errors raised by the segmentation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected {expected} channel(s), got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("channel index {index} out of range for a {channels}-channel image")]
    BadChannel { index: usize, channels: usize },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("{0} out of bounds")]
    OutOfBounds(String),

    #[error("invalid image buffer: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("filter size {filter_size} does not fit a {width}x{height} image")]
    FilterTooLarge {
        filter_size: usize,
        width: usize,
        height: usize,
    },

    #[error("image {width}x{height} is smaller than the {min}px detector minimum")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("degenerate contour: {0}")]
    DegenerateContour(&'static str),

    #[error("histogram has {nonempty} non-empty bins, need at least {classes}")]
    DegenerateHistogram { nonempty: usize, classes: usize },

    #[error("{0} region is empty")]
    EmptyRegion(&'static str),

    #[error("lesion shape does not fit the image with the required margin")]
    ShapeOutOfBounds,

    #[error("malformed mask: sample value {value} at ({x}, {y}) is neither 0 nor 255")]
    MalformedMask { x: usize, y: usize, value: u8 },

    #[error("unmatched ids: {}", .0.join(", "))]
    UnmatchedIds(Vec<String>),

    #[error("case {id}: {source}")]
    Case { id: String, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        }
    }
}
