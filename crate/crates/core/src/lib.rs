//! Desk-scale benchmark for silhouette-driven few-shot reconstruction:
//! synthetic multi-view rendering, query-based masking, visual-hull carving,
//! mesh cleaning and geometric/texture evaluation.

pub mod camera;
pub mod clean;
pub mod geometry;
pub mod harness;
mod mc_table;
pub mod metrics;
pub mod reconstruct;
pub mod render;
pub mod segment;
