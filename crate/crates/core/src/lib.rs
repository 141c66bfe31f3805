//! Algebraic multigrid for lowest-order edge-element discretizations of
//! `curl curl u + sigma u = f`, with coarse spaces that keep an exact
//! discrete gradient relation between levels.

pub mod discretize;
pub mod emin_setup;
pub mod error;
pub mod experiment;
pub mod krylov;
pub mod mesh;
pub mod mmio;
pub mod multigrid;
pub mod nodal;
pub mod prolongator;
pub mod sparse;
pub mod stationarity;
pub mod topology;

pub use error::{Error, Result};
pub use sparse::SparseMatrix;
