//! Silhouette-based reconstruction: visual-hull carving, sparse tracks,
//! iso-surface extraction and vertex coloring.

mod carve;
mod colorize;
mod marching;
mod tracks;

pub use carve::{bounds_from_silhouettes, carve, CarveResult, CarveStats};
pub use colorize::{colorize, ColorizeReport};
pub use marching::{euler_characteristic, extract_mesh, is_watertight, marching_cubes, ScalarField};
pub use tracks::{sample_tracks, Observation, SparseTracks};

use thiserror::Error;

use crate::geometry::GeometryError;

pub const DEFAULT_RESOLUTION: usize = 128;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("no views to carve from")]
    NoViews,
    #[error("nothing to extract: grid is empty")]
    NothingToExtract,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
