use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("bad NIfTI magic {0:?}, expected \"n+1\\0\"")]
    BadMagic([u8; 4]),

    #[error("bad NIfTI header size {0}, expected 348")]
    BadHeaderSize(i32),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDataType(i16),

    #[error("not a 3D volume: dim = {0:?}")]
    NotThreeDimensional([i16; 8]),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("voxel {index} holds {value}, which is not a whole-number label (probability map?)")]
    NonIntegerLabel { index: usize, value: f64 },

    #[error("voxel {index} holds negative or oversized label {value}")]
    LabelOutOfRange { index: usize, value: f64 },

    #[error("data length {found} does not match dims {dims:?}")]
    DataLength { dims: [usize; 3], found: usize },

    #[error("index {index} out of range for axis {axis} with extent {extent}")]
    IndexOutOfRange {
        axis: usize,
        index: usize,
        extent: usize,
    },

    #[error("invalid axis {0}, expected 0, 1 or 2")]
    InvalidAxis(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("component {0} is empty or does not exist")]
    EmptyComponent(u32),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("parameter {u} outside curve domain [{lo}, {hi}]")]
    OutsideDomain { u: f64, lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("target label {label} at voxel {index} is not below class count {classes}")]
    TargetOutOfRange {
        index: usize,
        label: u32,
        classes: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),
}

impl Error {
    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
