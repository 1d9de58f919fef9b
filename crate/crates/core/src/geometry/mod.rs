//! Geometric primitives shared by every stage: meshes, point clouds, boxes,
//! voxel lattices and a nearest-neighbour index.

mod aabb;
mod io;
mod kdtree;
mod mesh;
mod voxel;

pub use aabb::Aabb;
pub use io::{format_real, load_mesh, save_mesh};
pub use kdtree::SpatialIndex;
pub use mesh::{bounding_box, normalize_to_unit, sample_surface, NormalizeTransform, PointCloud, Rgb, TriangleMesh};
pub use voxel::{voxelize, VoxelGrid};

use std::path::PathBuf;

use thiserror::Error;

/// World-space point or direction.
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("face {face} references vertex {index} but mesh has {vertex_count} vertices")]
    FaceIndexOutOfRange { face: usize, index: usize, vertex_count: usize },
    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteVertex { vertex: usize },
    #[error("vertex color count {colors} does not match vertex count {vertices}")]
    ColorCountMismatch { colors: usize, vertices: usize },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("bounding box has zero diagonal")]
    ZeroDiagonal,
    #[error("bounds are not finite or are inverted")]
    InvalidBounds,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
