//! Discrete Fourier transforms, Fourier-slice evaluation and common-set
//! enumeration.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::lattice::{centered, coords, slot, LatticeSpec, Object3D};
use crate::projector::{project, Direction, Projection2D};

/// 3D DFT of an object on `Z_p^3`, storage-ordered.
#[derive(Debug, Clone)]
pub struct Spectrum3D {
    spec: LatticeSpec,
    values: Vec<Complex64>,
}

impl Spectrum3D {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at integer (centered or not) frequency, taken modulo `p`.
    pub fn get(&self, xi: i64, eta: i64, zeta: i64) -> Complex64 {
        let p = self.spec.p();
        self.values[(slot(xi, p) * p + slot(eta, p)) * p + slot(zeta, p)]
    }
}

/// `f^(xi, eta, zeta) = sum f(i,j,k) exp(-i 2 pi (xi i + eta j + zeta k) / p)`.
pub fn dft3(obj: &Object3D) -> Spectrum3D {
    let spec = *obj.spec();
    let (n, p) = (spec.n(), spec.p());
    let mut data = vec![Complex64::new(0.0, 0.0); p * p * p];
    for i in coords(n) {
        for j in coords(n) {
            for k in coords(n) {
                data[(slot(i, p) * p + slot(j, p)) * p + slot(k, p)] = obj.get(i, j, k);
            }
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(p);
    // innermost axis is contiguous
    fft.process(&mut data);
    let mut lane = vec![Complex64::new(0.0, 0.0); p];
    for a in 0..p {
        for c in 0..p {
            for b in 0..p {
                lane[b] = data[(a * p + b) * p + c];
            }
            fft.process(&mut lane);
            for b in 0..p {
                data[(a * p + b) * p + c] = lane[b];
            }
        }
    }
    for b in 0..p {
        for c in 0..p {
            for a in 0..p {
                lane[a] = data[(a * p + b) * p + c];
            }
            fft.process(&mut lane);
            for a in 0..p {
                data[(a * p + b) * p + c] = lane[a];
            }
        }
    }
    Spectrum3D { spec, values: data }
}

/// Unnormalized 2D DFT of a projection over `Z_p^2`, storage-ordered.
pub fn dft2(proj: &Projection2D) -> Vec<Complex64> {
    let mut data = proj.values().to_vec();
    fft2(proj.spec().p()).forward(&mut data);
    data
}

/// Evaluates the band-limited extension of a 3D spectrum on Fourier slices.
///
/// Keeps, for every family axis and integer transverse frequency, the
/// partial transform over the `n` object coordinates of that axis; any
/// slice value is then an `O(n)` Laurent-polynomial sum.
pub struct SliceEvaluator {
    spec: LatticeSpec,
    /// `partial[axis][(s1 * p + s2) * n + s]`.
    partial: [Vec<Complex64>; 3],
}

impl SliceEvaluator {
    pub fn new(spectrum: &Spectrum3D) -> Self {
        let spec = *spectrum.spec();
        let (n, p) = (spec.n(), spec.p());
        let pf = p as f64;
        // inverse 1D DFT kernel restricted to the object coordinates
        let kernel: Vec<Complex64> = (0..n)
            .flat_map(|s| {
                let i = centered(s, n) as f64;
                (0..p).map(move |sx| {
                    Complex64::from_polar(1.0 / pf, 2.0 * PI * centered(sx, p) as f64 * i / pf)
                })
            })
            .collect();
        let partial = [0usize, 1, 2].map(|axis| {
            let mut out = vec![Complex64::new(0.0, 0.0); p * p * n];
            for s1 in 0..p {
                for s2 in 0..p {
                    for s in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for sx in 0..p {
                            let ix = match axis {
                                0 => (sx * p + s1) * p + s2,
                                1 => (s1 * p + sx) * p + s2,
                                _ => (s1 * p + s2) * p + sx,
                            };
                            acc += spectrum.values[ix] * kernel[s * p + sx];
                        }
                        out[(s1 * p + s2) * n + s] = acc;
                    }
                }
            }
            out
        });
        Self { spec, partial }
    }

    /// Spectrum at the slice point of `dir` with transverse frequency `k`.
    pub fn slice_value(&self, dir: &Direction, k: (i64, i64)) -> Complex64 {
        let (n, p) = (self.spec.n(), self.spec.p());
        let (s1, s2) = (slot(k.0, p), slot(k.1, p));
        // the band-limited extension needs the centered representative
        let (k1, k2) = (centered(s1, p) as f64, centered(s2, p) as f64);
        let axial = -dir.alpha() * k1 - dir.beta() * k2;
        let row = &self.partial[dir.family().axis()][(s1 * p + s2) * n..(s1 * p + s2 + 1) * n];
        row.iter()
            .enumerate()
            .map(|(s, v)| {
                let i = centered(s, n) as f64;
                v * Complex64::from_polar(1.0, -2.0 * PI * axial * i / p as f64)
            })
            .sum()
    }
}

/// The 3D spectrum at the point of the slice orthogonal to `dir` with
/// transverse integer frequency `k` (e.g. `f^(-alpha eta - beta zeta, eta,
/// zeta)` for an x-direction).
pub fn fourier_slice(spectrum: &Spectrum3D, dir: &Direction, k: (i64, i64)) -> Complex64 {
    let spec = *spectrum.spec();
    let (n, p) = (spec.n(), spec.p());
    let (s1, s2) = (slot(k.0, p), slot(k.1, p));
    let (k1, k2) = (centered(s1, p) as f64, centered(s2, p) as f64);
    let axial = -dir.alpha() * k1 - dir.beta() * k2;
    let axis = dir.family().axis();
    let pf = p as f64;
    let mut out = Complex64::new(0.0, 0.0);
    for s in 0..n {
        let i = centered(s, n) as f64;
        // partial transform at object coordinate i
        let mut partial = Complex64::new(0.0, 0.0);
        for sx in 0..p {
            let ix = match axis {
                0 => (sx * p + s1) * p + s2,
                1 => (s1 * p + sx) * p + s2,
                _ => (s1 * p + s2) * p + sx,
            };
            let xi = centered(sx, p) as f64;
            partial += spectrum.values[ix] * Complex64::from_polar(1.0, 2.0 * PI * xi * i / pf);
        }
        out += partial / pf * Complex64::from_polar(1.0, -2.0 * PI * axial * i / pf);
    }
    out
}

/// Largest deviation over `k in Z_p^2` between the DFT of the projection
/// and the corresponding slice of the 3D DFT.
pub fn verify_slice_theorem(obj: &Object3D, dir: &Direction) -> f64 {
    let p = obj.spec().p();
    let proj_hat = dft2(&project(obj, dir));
    let evaluator = SliceEvaluator::new(&dft3(obj));
    let mut worst = 0.0f64;
    for s1 in 0..p {
        for s2 in 0..p {
            let k = (centered(s1, p), centered(s2, p));
            let d = (proj_hat[s1 * p + s2] - evaluator.slice_value(dir, k)).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Matching integer frequencies on the slices of two directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonLinePair {
    pub k: (i64, i64),
    pub k_prime: (i64, i64),
}

const COMMON_TOL: f64 = 1e-12;

/// Frequency-space point of the slice of `dir` at transverse coordinates `k`.
fn slice_point(dir: &Direction, k: (f64, f64)) -> [f64; 3] {
    let mut pt = [0.0; 3];
    let (a1, a2) = dir.family().transverse();
    pt[a1] = k.0;
    pt[a2] = k.1;
    pt[dir.family().axis()] = -dir.alpha() * k.0 - dir.beta() * k.1;
    pt
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= COMMON_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Integer points shared by the Fourier slices of `t` and `t_prime` within
/// `Z_p^2` on both sides. Slopes are compared with a `1e-12` relative
/// tolerance, so rational slopes given in decimal are treated as exact.
pub fn common_line_points(
    t: &Direction,
    t_prime: &Direction,
    spec: &LatticeSpec,
) -> Result<Vec<CommonLinePair>> {
    let angle = t.angle_to(t_prime);
    if !(1e-12..=PI - 1e-12).contains(&angle) {
        return Err(Error::ParallelDirections);
    }
    let p = spec.p();
    let (b1, b2) = t_prime.family().transverse();
    let axis_prime = t_prime.family().axis();
    let mut out = Vec::new();
    for k1 in coords(p) {
        for k2 in coords(p) {
            let pt = slice_point(t, (k1 as f64, k2 as f64));
            let (u, v) = (pt[b1], pt[b2]);
            let (ru, rv) = (u.round(), v.round());
            if !near(u, ru) || !near(v, rv) {
                continue;
            }
            let kp = (ru as i64, rv as i64);
            if !crate::lattice::contains(kp.0, p) || !crate::lattice::contains(kp.1, p) {
                continue;
            }
            let other = slice_point(t_prime, (ru, rv));
            if near(pt[axis_prime], other[axis_prime]) {
                out.push(CommonLinePair {
                    k: (k1, k2),
                    k_prime: kp,
                });
            }
        }
    }
    Ok(out)
}
