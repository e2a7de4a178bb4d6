use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{lowest, slot, LatticeSpec};

/// Default minimum chord between Vandermonde nodes on the unit circle.
pub const DEFAULT_NODE_TOL: f64 = 1e-9;

const FALLBACK_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeSolution {
    /// Solution in storage order over `Z_n`.
    pub x: Vec<Complex64>,
    /// `||V x - rhs|| / ||rhs||`.
    pub residual: f64,
    pub used_fallback: bool,
    pub min_gap: f64,
}

fn node(xi: f64, p: usize) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * xi / p as f64)
}

/// Matrix `V[i][m] = z_i^(j_m)` with `j_m` the ascending coordinates of `Z_n`.
fn matrix(z: &[Complex64], n: usize) -> DMatrix<Complex64> {
    let lo = lowest(n) as i32;
    DMatrix::from_fn(z.len(), n, |i, m| z[i].powi(lo + m as i32))
}

fn min_chord(z: &[Complex64]) -> f64 {
    let mut ang: Vec<f64> = z.iter().map(|w| w.arg().rem_euclid(2.0 * PI)).collect();
    ang.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for w in 0..ang.len() {
        let g = if w + 1 < ang.len() {
            ang[w + 1] - ang[w]
        } else if ang.len() > 1 {
            ang[0] + 2.0 * PI - ang[w]
        } else {
            continue;
        };
        best = best.min(2.0 * (g.min(2.0 * PI - g) / 2.0).sin().abs());
    }
    best
}

fn relative_residual(v: &DMatrix<Complex64>, y: &[Complex64], rhs: &[Complex64]) -> f64 {
    let r = v * DVector::from_column_slice(y) - DVector::from_column_slice(rhs);
    let scale = rhs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        r.norm()
    } else {
        r.norm() / scale
    }
}

fn to_storage(y: &[Complex64], n: usize) -> Vec<Complex64> {
    let lo = lowest(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (m, v) in y.iter().enumerate() {
        out[slot(lo + m as i64, n)] = *v;
    }
    out
}

/// Solves `sum_j exp(-i 2 pi xi_i j / p) x_j = rhs_i` over `j in Z_n`.
///
/// The result is returned in storage order (`x[0]` is `j = 0`).
pub fn vandermonde_solve(nodes: &[f64], rhs: &[Complex64], spec: &LatticeSpec) -> Result<Vec<Complex64>> {
    Ok(vandermonde_solve_with(nodes, rhs, spec, DEFAULT_NODE_TOL)?.x)
}

/// Björck–Pereyra solve with a dense LU fallback.
pub fn vandermonde_solve_with(
    nodes: &[f64],
    rhs: &[Complex64],
    spec: &LatticeSpec,
    tol: f64,
) -> Result<VandermondeSolution> {
    let n = spec.n();
    if nodes.len() != n || rhs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} nodes and {n} values"),
            got: format!("{} nodes and {} values", nodes.len(), rhs.len()),
        });
    }
    let z: Vec<Complex64> = nodes.iter().map(|&xi| node(xi, spec.p())).collect();
    let min_gap = min_chord(&z);
    if n > 1 && !(min_gap > tol) {
        return Err(Error::NearSingular { min_gap, tol });
    }

    // Shift to monomials z^0..z^(n-1), then interpolate in Newton form.
    let lo = lowest(n) as i32;
    let mut a: Vec<Complex64> = rhs.iter().zip(&z).map(|(b, zi)| b / zi.powi(lo)).collect();
    for k in 0..n.saturating_sub(1) {
        for i in (k + 1..n).rev() {
            a[i] = (a[i] - a[i - 1]) / (z[i] - z[i - k - 1]);
        }
    }
    for k in (0..n.saturating_sub(1)).rev() {
        for i in k..n - 1 {
            let next = a[i + 1];
            a[i] -= z[k] * next;
        }
    }

    let v = matrix(&z, n);
    let mut residual = relative_residual(&v, &a, rhs);
    let mut used_fallback = false;
    if !(residual <= FALLBACK_RESIDUAL) {
        if let Some(sol) = v.clone().lu().solve(&DVector::from_column_slice(rhs)) {
            let r = relative_residual(&v, sol.as_slice(), rhs);
            if r < residual || !residual.is_finite() {
                a = sol.as_slice().to_vec();
                residual = r;
                used_fallback = true;
            }
        }
    }
    Ok(VandermondeSolution {
        x: to_storage(&a, n),
        residual,
        used_fallback,
        min_gap,
    })
}

/// Least-squares solve of the overdetermined system with `m >= n` nodes.
pub fn vandermonde_lstsq(nodes: &[f64], rhs: &[Complex64], spec: &LatticeSpec) -> Result<VandermondeSolution> {
    let n = spec.n();
    let m = nodes.len();
    if m < n || rhs.len() != m {
        return Err(Error::ShapeMismatch {
            expected: format!("at least {n} nodes and as many values"),
            got: format!("{m} nodes and {} values", rhs.len()),
        });
    }
    if m == n {
        return vandermonde_solve_with(nodes, rhs, spec, DEFAULT_NODE_TOL);
    }
    let z: Vec<Complex64> = nodes.iter().map(|&xi| node(xi, spec.p())).collect();
    let v = matrix(&z, n);
    let qr = v.clone().qr();
    let r = qr.r();
    let diag_max = (0..n).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let diag_min = (0..n).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(diag_min > DEFAULT_NODE_TOL * diag_max.max(1.0)) {
        return Err(Error::NearSingular {
            min_gap: diag_min,
            tol: DEFAULT_NODE_TOL,
        });
    }
    let qtb = qr.q().adjoint() * DVector::from_column_slice(rhs);
    let y = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::NearSingular {
            min_gap: diag_min,
            tol: DEFAULT_NODE_TOL,
        })?;
    let residual = relative_residual(&v, y.as_slice(), rhs);
    Ok(VandermondeSolution {
        x: to_storage(y.as_slice(), n),
        residual,
        used_fallback: false,
        min_gap: min_chord(&z),
    })
}
