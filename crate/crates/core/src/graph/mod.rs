//! Lattice domains and the Green function of killed simple random walk.

mod domain;
mod green;

pub use domain::{build_domain, LatticeDomain, Shape, EXIT, MIN_MESH, STEPS};
pub use green::{green_function, sample_gff, GreenTable, DENSE_LIMIT};
