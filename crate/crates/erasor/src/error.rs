use std::path::PathBuf;

use thiserror::Error;

use crate::geom::Frame;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index} has non-finite coordinates")]
    NonFinitePoint { index: usize },

    #[error("rotation matrix is not a proper rotation: {detail}")]
    InvalidRotation { detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: truncated 16-byte record at byte offset {offset}")]
    TruncatedScan { path: PathBuf, offset: u64 },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("label count mismatch: expected {expected} labels, file holds {actual}")]
    LabelCount { expected: usize, actual: usize },

    #[error("unknown config key `{key}`")]
    UnknownConfigKey { key: String },

    #[error("config key `{key}`: {detail}")]
    ConfigValue { key: String, detail: String },

    #[error("config field `{field}`: {detail}")]
    ConfigInvariant { field: &'static str, detail: String },

    #[error("scan/pose count mismatch: {scans} scans vs {poses} poses")]
    CountMismatch { scans: usize, poses: usize },

    #[error("pose file covers {have} frames but frames {start}..={end} were requested")]
    FrameRange {
        start: usize,
        end: usize,
        have: usize,
    },

    #[error("query cloud frame {query:?} does not match pose stamp {pose}")]
    StampMismatch { query: Frame, pose: usize },

    #[error("descriptor grid shapes differ: {a:?} vs {b:?} (rings, sectors)")]
    GridShape {
        a: (usize, usize),
        b: (usize, usize),
    },

    #[error("plane fit is degenerate ({points} points, rank < 2)")]
    DegeneratePlane { points: usize },

    #[error("voxel size must be positive, got {0}")]
    VoxelSize(f64),

    #[error("invalid scene spec: {0}")]
    Scene(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
