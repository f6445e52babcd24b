use thiserror::Error;

/// Errors produced anywhere in the positioning pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("anchors are collinear or coincident")]
    CollinearAnchors,
    #[error("range value is not finite or not positive")]
    NonFiniteRange,
    #[error("coordinate is not finite")]
    NonFinitePoint,
    #[error("sample series is empty")]
    EmptySeries,
    #[error("true distances of a calibration pair are equal ({0} mm)")]
    DegeneratePair(f64),
    #[error("fitted slope {0} is not positive")]
    NonPositiveSlope(f64),
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
    #[error("cell label {label} out of range (cell count {count})")]
    LabelOutOfRange { label: u32, count: u32 },
    #[error("point ({x}, {y}) lies outside the grid area")]
    OutOfArea { x: f64, y: f64 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} out of range for {rows} training rows")]
    KOutOfRange { k: usize, rows: usize },
    #[error("reports do not share the same test points")]
    MismatchedTestPoints,
    #[error("missing reference point ({x}, {y}) in measurement data")]
    MissingReferencePoint { x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
