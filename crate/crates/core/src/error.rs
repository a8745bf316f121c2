use std::path::PathBuf;

use crate::volume::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid spacing ({0}, {1}, {2}): every component must be positive and finite")]
    InvalidSpacing(f64, f64, f64),
    #[error("invalid label coding: codes must be pairwise distinct, got {0:?}")]
    InvalidCoding([u8; 4]),
    #[error("invalid shape {0:?}: every dimension must be positive")]
    InvalidShape(Shape),
    #[error("data length {actual} does not match shape {shape:?}")]
    DataLength { shape: Shape, actual: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Shape, right: Shape },
    #[error("spacing mismatch between volumes")]
    SpacingMismatch,
    #[error("label coding mismatch between volumes")]
    CodingMismatch,
    #[error("unknown label code {code} at voxel {index:?}")]
    UnknownLabel { code: i64, index: [usize; 3] },
    #[error("non-integral label value {value} at voxel {index:?}")]
    NonIntegralLabel { value: f64, index: [usize; 3] },
    #[error("probability {value} outside [0, 1] at voxel {index:?}")]
    ProbabilityOutOfRange { value: f64, index: [usize; 3] },
    #[error("region masks violate ET <= TC <= WT nesting at voxel {0:?}")]
    NestingViolation([usize; 3]),
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("{0}")]
    Domain(String),
    #[error("invalid metric table: {0}")]
    InvalidTable(String),

    #[error("bad NIfTI magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("volume is not 3D (dim[0] = {0})")]
    NotThreeDimensional(i16),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("payload size mismatch: header declares {expected} bytes, file holds {actual}")]
    PayloadSize { expected: u64, actual: u64 },
    #[error("value {value} cannot be stored exactly as {datatype}")]
    Unrepresentable { value: f64, datatype: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic(_)
            | Error::UnsupportedFormat(_)
            | Error::UnsupportedDatatype(_)
            | Error::NotThreeDimensional(_)
            | Error::InvalidHeader(_)
            | Error::Truncated { .. }
            | Error::PayloadSize { .. }
            | Error::Unrepresentable { .. } => "format",
            Error::Domain(_) | Error::EmptyInput(_) => "domain",
            _ => "validation",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
