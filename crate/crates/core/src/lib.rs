//! Random walk loop soups on planar lattice domains, their occupation
//! fields, loop clusters, thick-point chaos and the one-dimensional squared
//! Bessel theory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel1d;
pub mod cli;
pub mod clusters;
pub mod error;
pub mod fields;
pub mod gff_iso;
pub mod graph;
pub mod loopsoup;
pub mod mc;
pub mod special;

pub use error::{Error, Result};
