use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("unsupported dimensionality: {0}")]
    UnsupportedDimensionality(String),
    #[error("truncated voxel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("non-finite voxel value at linear index {index}")]
    NonFiniteVoxel { index: usize },
    #[error("value {value} at linear index {index} is not representable as {datatype}")]
    ValueOutOfRange {
        value: f64,
        index: usize,
        datatype: &'static str,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("affine mismatch: max element difference {max_diff} exceeds tolerance")]
    AffineMismatch { max_diff: f64 },
    #[error("empty mask: {0}")]
    EmptyMask(String),
    #[error("NIHSS component {name} = {value} outside 0..={max}")]
    ComponentOutOfRange {
        name: &'static str,
        value: i64,
        max: i64,
    },
    #[error("design matrix is rank deficient (column {column} is collinear with earlier columns)")]
    RankDeficient { column: usize },
    #[error("too few observations: n = {n} with {k} terms")]
    TooFewObservations { n: usize, k: usize },
    #[error("subject {id}: haematoma volume {value} mL is not positive")]
    NonPositiveHaematomaVolume { id: String, value: f64 },
    #[error("no subjects left after dropping missing {outcome} ({dropped} dropped)")]
    EmptyCohortAfterFiltering { outcome: String, dropped: usize },
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("empty cohort")]
    EmptyCohort,
    #[error("empty input")]
    EmptyInput,
    #[error("subject {id}: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("phantom geometry out of bounds: {0}")]
    GeometryOutOfBounds(String),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
