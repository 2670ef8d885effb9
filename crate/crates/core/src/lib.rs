//! Space-time cut finite element solver for the incompressible Navier–Stokes
//! equations around prescribed moving rigid bodies.
//!
//! The fluid domain is embedded in a fixed structured quadrilateral mesh.
//! Dirichlet data are imposed weakly by Nitsche's method, cells covered by the
//! body are stabilized by a ghost penalty on polynomial extensions, and time is
//! discretized by discontinuous Galerkin on Gauss–Radau nodes.

pub mod app;
pub mod error;
pub mod fe_space;
pub mod forms;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod solver;
pub mod timeslab;

pub use error::{Error, Result};
pub use mesh::Point;
