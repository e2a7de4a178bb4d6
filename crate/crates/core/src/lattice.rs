//! Discrete objects on the centered lattice and their band-limited
//! (Dirichlet-kernel) interpolation.
//!
//! All arrays use the wrapped storage convention: storage slot `s` holds
//! the centered coordinate `s` for `s < (len + 1) / 2` and `s - len`
//! otherwise. For odd lengths this is the symmetric range
//! `[-(len-1)/2, (len-1)/2]`; for even lengths it is `[-len/2, len/2 - 1]`.
//! The same convention is what the DFT expects, so no phase ramps are
//! needed when moving between the object and its spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Centered coordinate held by storage slot `s` of an axis of length `len`.
#[inline]
pub fn centered(s: usize, len: usize) -> i64 {
    if s < len.div_ceil(2) {
        s as i64
    } else {
        s as i64 - len as i64
    }
}

/// Storage slot of centered coordinate `c` (taken modulo `len`).
#[inline]
pub fn slot(c: i64, len: usize) -> usize {
    c.rem_euclid(len as i64) as usize
}

/// Smallest centered coordinate of an axis of length `len`.
#[inline]
pub fn lowest(len: usize) -> i64 {
    -((len / 2) as i64)
}

/// Centered coordinates of an axis in ascending order.
pub fn coords(len: usize) -> impl Iterator<Item = i64> + Clone {
    let lo = lowest(len);
    lo..lo + len as i64
}

/// Whether centered coordinate `c` lies inside an axis of length `len`.
#[inline]
pub fn contains(c: i64, len: usize) -> bool {
    let lo = lowest(len);
    c >= lo && c < lo + len as i64
}

/// Object extent `n`, padded extent `p` and wavenumber `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    n: usize,
    p: usize,
    kappa: f64,
}

impl LatticeSpec {
    pub fn new(n: usize, p: usize, kappa: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLattice("n must be positive".into()));
        }
        if p.is_multiple_of(2) {
            return Err(Error::InvalidLattice(format!("p = {p} must be odd")));
        }
        if p < 2 * n - 1 {
            return Err(Error::InvalidLattice(format!(
                "p = {p} must be at least 2n - 1 = {}",
                2 * n - 1
            )));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidLattice(format!("kappa = {kappa} must be positive")));
        }
        Ok(Self { n, p, kappa })
    }

    /// `p = 2n - 1` and `kappa = pi`.
    pub fn with_n(n: usize) -> Result<Self> {
        Self::new(n, (2 * n).max(2) - 1, PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Wrap period of the phase projection, `2 pi / kappa`.
    pub fn wrap_period(&self) -> f64 {
        2.0 * PI / self.kappa
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(self.n, self.p, kappa)
    }
}

/// The `p`-periodic Dirichlet kernel `sin(pi t) / (p sin(pi t / p))`, equal
/// to 1 on multiples of `p`. `p` must be odd.
pub fn dirichlet_kernel(t: f64, p: usize) -> f64 {
    let pf = p as f64;
    // reduce to (-p/2, p/2]; the kernel is p-periodic for odd p
    let mut u = t.rem_euclid(pf);
    if u > pf / 2.0 {
        u -= pf;
    }
    if u == 0.0 {
        return 1.0;
    }
    if u.abs() < 1e-8 {
        let x = PI * u;
        return 1.0 - x * x / 6.0 * (1.0 - 1.0 / (pf * pf));
    }
    (PI * u).sin() / (pf * (PI * u / pf).sin())
}

/// Complex voxel grid on `Z_n^3`, implicitly zero on the rest of `Z_p^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Object3D {
    spec: LatticeSpec,
    values: Vec<Complex64>,
}

impl Object3D {
    pub fn zeros(spec: LatticeSpec) -> Self {
        let n = spec.n();
        Self {
            spec,
            values: vec![Complex64::new(0.0, 0.0); n * n * n],
        }
    }

    /// Builds an object from a function of centered coordinates.
    pub fn from_fn<F>(spec: LatticeSpec, mut f: F) -> Self
    where
        F: FnMut(i64, i64, i64) -> Complex64,
    {
        let mut obj = Self::zeros(spec);
        let n = spec.n();
        for si in 0..n {
            for sj in 0..n {
                for sk in 0..n {
                    obj.values[(si * n + sj) * n + sk] =
                        f(centered(si, n), centered(sj, n), centered(sk, n));
                }
            }
        }
        obj
    }

    /// Wraps storage-ordered values (length `n^3`).
    pub fn from_storage(spec: LatticeSpec, values: Vec<Complex64>) -> Result<Self> {
        let n = spec.n();
        if values.len() != n * n * n {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", n * n * n),
                got: format!("{}", values.len()),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    /// Storage-ordered values.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    fn index(&self, i: i64, j: i64, k: i64) -> Option<usize> {
        let n = self.n();
        if contains(i, n) && contains(j, n) && contains(k, n) {
            Some((slot(i, n) * n + slot(j, n)) * n + slot(k, n))
        } else {
            None
        }
    }

    /// Value at centered coordinates; zero outside `Z_n^3`.
    pub fn get(&self, i: i64, j: i64, k: i64) -> Complex64 {
        self.index(i, j, k)
            .map_or(Complex64::new(0.0, 0.0), |ix| self.values[ix])
    }

    /// Panics when the coordinates lie outside `Z_n^3`.
    pub fn set(&mut self, i: i64, j: i64, k: i64, v: Complex64) {
        let ix = self
            .index(i, j, k)
            .unwrap_or_else(|| panic!("({i}, {j}, {k}) outside Z_{}^3", self.n()));
        self.values[ix] = v;
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    /// Real part as a new object.
    pub fn real_part(&self) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: Complex64, other: &Self) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    /// Largest absolute difference between neighbouring voxels along any
    /// axis (real parts).
    pub fn max_adjacent_variation(&self) -> f64 {
        let n = self.n() as i64;
        let lo = lowest(self.n());
        let mut worst = 0.0f64;
        for i in lo..lo + n {
            for j in lo..lo + n {
                for k in lo..lo + n {
                    let v = self.get(i, j, k).re;
                    if i + 1 < lo + n {
                        worst = worst.max((self.get(i + 1, j, k).re - v).abs());
                    }
                    if j + 1 < lo + n {
                        worst = worst.max((self.get(i, j + 1, k).re - v).abs());
                    }
                    if k + 1 < lo + n {
                        worst = worst.max((self.get(i, j, k + 1).re - v).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Continuous band-limited interpolation of `obj` at `(x, y, z)`.
pub fn interpolate(obj: &Object3D, x: f64, y: f64, z: f64) -> Complex64 {
    let n = obj.n();
    let p = obj.spec().p();
    let weights = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|s| dirichlet_kernel(t - centered(s, n) as f64, p))
            .collect()
    };
    let (wx, wy, wz) = (weights(x), weights(y), weights(z));
    let vals = obj.values();
    let mut acc = Complex64::new(0.0, 0.0);
    for si in 0..n {
        for sj in 0..n {
            let wij = wx[si] * wy[sj];
            if wij == 0.0 {
                continue;
            }
            let row = &vals[(si * n + sj) * n..(si * n + sj + 1) * n];
            let mut inner = Complex64::new(0.0, 0.0);
            for (v, w) in row.iter().zip(&wz) {
                inner += v * w;
            }
            acc += inner * wij;
        }
    }
    acc
}
