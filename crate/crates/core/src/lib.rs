//! Discrete forward models and reconstruction engines for tomographic
//! phase retrieval and phase unwrapping.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod io;
pub mod lattice;
pub mod measurement;
pub mod phantom;
pub mod projector;
pub mod recon;
pub mod spectral;
pub mod tilt;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{dirichlet_kernel, interpolate, LatticeSpec, Object3D};
pub use projector::{Direction, Family, Projection2D};
pub use num_complex::Complex64;
