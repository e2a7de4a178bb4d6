//! Reconstruction engines and quality metrics.

mod ap;
mod operator;
mod tomography;
mod unwrap;

pub use ap::{ap_reconstruct, ap_reconstruct_with, magnitude_projection, ApOptions, ReconReport};
pub use operator::{CgInfo, MeasurementOperator, OperatorFlags, DEFAULT_CG_MAX_ITERS, DEFAULT_CG_TOL};
pub use tomography::{vandermonde_tomography, vandermonde_tomography_report, Tomogram};
pub use unwrap::{unwrap_tilt_series, unwrap_tilt_series_with, wrap_projection, UnwrapOptions, UnwrapResult};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Object3D;

/// Absolute correlation `|<conj(f), g>| / (||f|| ||g||)`, zero if either vanishes.
pub fn correlation(f: &Object3D, g: &Object3D) -> Result<f64> {
    if f.spec() != g.spec() {
        return Err(Error::LatticeMismatch);
    }
    let (nf, ng) = (f.norm(), g.norm());
    if nf == 0.0 || ng == 0.0 {
        return Ok(0.0);
    }
    let dot: Complex64 = f.values().iter().zip(g.values()).map(|(a, b)| a.conj() * b).sum();
    Ok((dot.norm() / (nf * ng)).min(1.0))
}

/// Lower bound `1 - n^2 |(b - a) / 2 pi|^floor(S/2)` on the probability that
/// a projection with `S` mask samples in a sector of angular width `b - a`
/// is determined; clamped at zero.
pub fn sector_bound(n: usize, a: f64, b_angle: f64, support: usize) -> Result<f64> {
    multi_direction_sector_bound(n, a, b_angle, support, 1)
}

/// Union bound over `directions` projections.
pub fn multi_direction_sector_bound(n: usize, a: f64, b_angle: f64, support: usize, directions: usize) -> Result<f64> {
    let width = (b_angle - a).abs();
    if !(width <= PI) {
        return Err(Error::InvalidArgument(format!("sector width {width} exceeds pi")));
    }
    let n2 = (n * n) as f64;
    let q = (width / (2.0 * PI)).powi((support / 2) as i32);
    Ok((1.0 - directions as f64 * n2 * q).max(0.0))
}
