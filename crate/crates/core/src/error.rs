use std::path::PathBuf;

use thiserror::Error;

use crate::spread::MaskViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata: {0}")]
    Metadata(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("size mismatch: expected {expected} values, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid dims {0:?}: need 1 to 3 positive extents")]
    InvalidDims(Vec<usize>),

    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("region `{0}` is empty")]
    EmptyRegion(String),

    #[error("region `{name}` is invalid: {reason}")]
    InvalidRegion { name: String, reason: String },

    #[error("unknown mask preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid spread mask: {}", format_violations(.0))]
    InvalidMask(Vec<MaskViolation>),

    #[error("mask tap leaves the grid at voxel {index} under the reject boundary policy")]
    BoundaryReject { index: usize },

    #[error("voxel {index} has no in-grid neighbor to exchange with")]
    IsolatedVoxel { index: usize },

    #[error("grid of {voxels} voxels exceeds the cap of {cap}")]
    TooLarge { voxels: usize, cap: usize },

    #[error(
        "infeasible: image sum {sum:e} is negative (no non-negative mean-preserving result exists)"
    )]
    Infeasible { sum: f64 },

    #[error("negative transfer coefficient {value} at voxel {index}")]
    NegativeTransfer { index: usize, value: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear program failed: {0}")]
    Lp(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[MaskViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
