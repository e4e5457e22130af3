//! Random constraint satisfaction workbench.

pub mod model;
pub mod factor_graph;
pub mod exact;
pub mod solvers;
pub mod moments;
pub mod geometry;
pub mod harness;
