//! Furniture meshes and the supporting surfaces extracted from them.

mod grid;
mod mesh;
mod rect;
mod surface;

pub use grid::OccupancyGrid;
pub use mesh::{Mesh, MeshBuilder, FRONT_AXIS};
pub use rect::Rect;
pub use surface::{extract_surfaces, footprint_contained, surface_dump_json, ExtractOptions, Surface};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("OBJ parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange { triangle: usize, index: usize, vertex_count: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("no supporting surface found")]
    NoSurface,
    #[error("invalid extraction options: {0}")]
    InvalidOptions(String),
    #[error("i/o error: {0}")]
    Io(String),
}
