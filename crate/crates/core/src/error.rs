use crate::grid::VoxelCoord;
use thiserror::Error;

/// Failures while decoding a voxel or skeleton file.
///
/// Text formats report 1-based line numbers, binary formats report byte offsets.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: malformed header: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("line {line}: malformed voxel record: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("line {line}: voxel ({x}, {y}, {z}) lies outside the declared dims {dims:?}")]
    OutOfBounds {
        line: usize,
        x: u64,
        y: u64,
        z: u64,
        dims: [u32; 3],
    },
    #[error("offset {offset}: bad magic, expected {expected:?}")]
    BadMagic { offset: usize, expected: &'static str },
    #[error("offset {offset}: truncated input, needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("offset {offset}: {count} unexpected trailing bytes")]
    TrailingBytes { offset: usize, count: usize },
    #[error("offset {offset}: voxel ({x}, {y}, {z}) lies outside the declared dims {dims:?}")]
    OutOfBoundsAt {
        offset: usize,
        x: u32,
        y: u32,
        z: u32,
        dims: [u32; 3],
    },
    #[error("offset {offset}: bad dims {dims:?}: each axis must be in 1..=2^31-1")]
    BadDims { offset: usize, dims: [u64; 3] },
    #[error("file declares no occupied voxels")]
    Empty,
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

#[derive(Error, Debug)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("skeleton document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("voxel {0} is not occupied")]
    NotOccupied(VoxelCoord),
    #[error("initial frontier is empty")]
    EmptyFrontier,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("noise iteration {iteration}: needed {needed} eligible voxels, found {available}")]
    InsufficientCandidates {
        iteration: usize,
        needed: usize,
        available: usize,
    },
    #[error("path trace stalled at {at}: no neighbor has a smaller label")]
    TraceStalled { at: VoxelCoord },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures that indicate a bug or corrupted state rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::TraceStalled { .. } | Error::Internal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
