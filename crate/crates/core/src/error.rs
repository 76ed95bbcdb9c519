//! Error type shared by every module in the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Requested wavelet name has no built-in filter bank.
    UnsupportedWavelet(String),
    /// Image too small for the requested filter or kernel.
    Dimension(String),
    /// Operand shapes do not agree.
    Shape(String),
    /// Invalid or infeasible configuration value.
    Config(String),
    /// A sampling mask could not be generated within tolerance.
    Mask(String),
    /// Dataset or required input is missing or unusable.
    Data(String),
    /// Oracle only supports low dimensions.
    UnsupportedDimension(usize),
    /// Reference image has no high-frequency content.
    DegenerateReference,
    /// Underlying I/O failure.
    Io(String),
    /// File failed magic or checksum validation.
    CorruptFile(String),
    /// File container version is not understood.
    VersionMismatch { found: u16, expected: u16 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedWavelet(name) => write!(f, "unsupported wavelet '{name}'"),
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Mask(msg) => write!(f, "mask generation failed: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::UnsupportedDimension(d) => {
                write!(f, "quadrature oracle supports dimension <= 2, got {d}")
            }
            Error::DegenerateReference => {
                write!(f, "reference image has zero high-frequency energy")
            }
            Error::Io(msg) => write!(f, "io error: {msg}"),
            Error::CorruptFile(msg) => write!(f, "corrupt file: {msg}"),
            Error::VersionMismatch { found, expected } => {
                write!(f, "container version {found} not supported (expected {expected})")
            }
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
