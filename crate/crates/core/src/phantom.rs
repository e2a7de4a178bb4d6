//! Test objects: rasters sliced into tiles and stacked, random and smooth volumes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::Raster;
use crate::lattice::{lowest, LatticeSpec, Object3D};

/// Tiles per raster side: the smallest `k` with `k^2 >= n`.
pub fn tiles_per_side(n: usize) -> usize {
    let mut k = (n as f64).sqrt().floor() as usize;
    while k * k < n {
        k += 1;
    }
    k
}

/// Partitions a `(n k) x (n k)` raster into `n x n` tiles, row-major, and
/// stacks the first `n` tiles along the third axis.
pub fn build_phantom(raster: &Raster, spec: LatticeSpec) -> Result<Object3D> {
    let n = spec.n();
    let k = tiles_per_side(n);
    let side = n * k;
    if raster.width != side || raster.height != side || raster.data.len() != side * side {
        return Err(Error::ShapeMismatch {
            expected: format!("{side}x{side} raster ({k}x{k} tiles of {n}x{n})"),
            got: format!("{}x{}", raster.width, raster.height),
        });
    }
    let lo = lowest(n);
    Ok(Object3D::from_fn(spec, |i, j, l| {
        let tile = (l - lo) as usize;
        let (tr, tc) = (tile / k, tile % k);
        let row = tr * n + (i - lo) as usize;
        let col = tc * n + (j - lo) as usize;
        Complex64::new(raster.data[row * side + col], 0.0)
    }))
}

/// Ellipse `(cx, cy, a, b, angle, value)` in the unit square `[-1, 1]^2`.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
];

/// Head-phantom raster of the given side, values in `[0, 1]`.
pub fn head_raster(side: usize) -> Raster {
    let mut data = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let x = (2.0 * c as f64 + 1.0) / side as f64 - 1.0;
            let y = 1.0 - (2.0 * r as f64 + 1.0) / side as f64;
            let mut v = 0.0;
            for &(cx, cy, a, b, deg, val) in &ELLIPSES {
                let (s, co) = deg.to_radians().sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, w) = (dx * co + dy * s, -dx * s + dy * co);
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += val;
                }
            }
            data[r * side + c] = f64::clamp(v, 0.0, 1.0);
        }
    }
    Raster {
        width: side,
        height: side,
        data,
    }
}

/// The built-in raster sized for `n`.
pub fn builtin_raster(n: usize) -> Raster {
    head_raster(n * tiles_per_side(n))
}

/// Voxels i.i.d. uniform on `[0, 1)`.
pub fn random_phantom(spec: LatticeSpec, seed: u64) -> Object3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Object3D::from_fn(spec, |_, _, _| Complex64::new(rng.random_range(0.0..1.0), 0.0))
}

/// A few Gaussian blobs scaled so the largest voxel equals `peak`.
/// Seeded positions and widths; widths keep neighbours close for moderate peaks.
pub fn blob_phantom(spec: LatticeSpec, seed: u64, peak: f64) -> Object3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spec.n() as f64 / 2.0;
    let blobs: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            let c = std::array::from_fn(|_| rng.random_range(-0.3 * half..0.3 * half));
            let width = rng.random_range(0.45 * half..0.7 * half).max(1.0);
            let weight = rng.random_range(0.5..1.0);
            (c, width, weight)
        })
        .collect();
    let raw = Object3D::from_fn(spec, |i, j, k| {
        let x = [i as f64, j as f64, k as f64];
        let v: f64 = blobs
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = (0..3).map(|m| (x[m] - c[m]).powi(2)).sum();
                a * (-r2 / (2.0 * w * w)).exp()
            })
            .sum();
        Complex64::new(v, 0.0)
    });
    let top = raw.values().iter().map(|v| v.re).fold(0.0, f64::max);
    raw.scaled(Complex64::new(peak / top, 0.0))
}
