//! Vertex-centered finite volume / boundary element coupling for parabolic-elliptic
//! interface problems in two dimensions.

pub mod bem;
pub mod coupling;
pub mod dual;
pub mod error;
pub mod error_analysis;
pub mod experiments;
pub mod fvm;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod spaces;
pub mod sparse;
pub mod time;
pub mod vtk;

pub use error::{Error, Result};
