//! Numerical toolkit for Cosserat fields with values in 180° rotations:
//! double-cover algebra, grid fields and energies, lifts and degrees,
//! dipole constructions and a projected-gradient minimizer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod bubble;
pub mod commands;
pub mod cuboid;
pub mod degree;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod minimize;
pub mod sampler;
pub mod singular;
pub mod surface;
pub mod so3;

pub use error::{Error, Result};
