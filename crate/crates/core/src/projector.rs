//! Discrete ray transforms along x-, y- and z-line families.
//!
//! A projection along `(1, alpha, beta)` sums the band-limited interpolant
//! over the lines `{(i, alpha i + c1, beta i + c2) : i in Z_n}`. Because the
//! interpolant is exactly the Dirichlet (band-limited) model, shifting slice
//! `i` by `(alpha i, beta i)` is a linear phase ramp in the 2D DFT of that
//! slice, so a projection costs one FFT per slice plus one inverse FFT.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::lattice::{centered, contains, slot, LatticeSpec, Object3D};

/// Which coordinate carries the unit entry of a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    X,
    Y,
    Z,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::X, Family::Y, Family::Z];

    /// Index of the line-family axis (0, 1, 2).
    pub fn axis(self) -> usize {
        match self {
            Family::X => 0,
            Family::Y => 1,
            Family::Z => 2,
        }
    }

    /// The two transverse axes, in the order of the pixel coordinates `(c1, c2)`.
    pub fn transverse(self) -> (usize, usize) {
        match self {
            Family::X => (1, 2),
            Family::Y => (0, 2),
            Family::Z => (0, 1),
        }
    }

    pub fn from_axis(axis: usize) -> Option<Self> {
        Family::ALL.get(axis).copied()
    }

    pub fn code(self) -> u8 {
        self.axis() as u8
    }

    pub fn letter(self) -> char {
        ['x', 'y', 'z'][self.axis()]
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Projection direction `(1, a, b)`, `(a, 1, b)` or `(a, b, 1)` with
/// slopes strictly inside `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    family: Family,
    alpha: f64,
    beta: f64,
}

impl Direction {
    pub fn new(family: Family, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0 && beta.abs() < 1.0) {
            return Err(Error::SlopeOutOfRange {
                alpha: alpha.abs(),
                beta: beta.abs(),
            });
        }
        Ok(Self { family, alpha, beta })
    }

    pub fn x(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::X, alpha, beta)
    }

    pub fn y(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Y, alpha, beta)
    }

    pub fn z(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Z, alpha, beta)
    }

    /// Direction of a nonzero vector, in the family of its largest
    /// component (lowest axis on ties). Slopes that land on `|s| = 1`
    /// through a tie are moved one ulp inside the open interval.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let axis = (0..3)
            .fold(0, |best, a| if v[a].abs() > v[best].abs() { a } else { best });
        let lead = v[axis];
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::InvalidArgument("zero or non-finite direction vector".into()));
        }
        let family = Family::from_axis(axis).expect("axis < 3");
        let (a1, a2) = family.transverse();
        let inside = |s: f64| {
            if s.abs() >= 1.0 {
                s.signum() * (1.0 - f64::EPSILON / 2.0)
            } else {
                s
            }
        };
        Self::new(family, inside(v[a1] / lead), inside(v[a2] / lead))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unnormalized vector with the unit entry on the family axis.
    pub fn vector(&self) -> [f64; 3] {
        let mut v = [0.0; 3];
        let (a1, a2) = self.family.transverse();
        v[self.family.axis()] = 1.0;
        v[a1] = self.alpha;
        v[a2] = self.beta;
        v
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let v = self.vector();
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / norm, v[1] / norm, v[2] / norm]
    }

    /// Angle between the unit vectors in `[0, pi]`; `t` and `-t` are distinct.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        angle_between(self.unit_vector(), other.unit_vector())
    }
}

pub(crate) fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    s.atan2(c)
}

/// Complex image on `Z_p^2` attached to a direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    spec: LatticeSpec,
    direction: Direction,
    values: Vec<Complex64>,
}

impl Projection2D {
    pub fn zeros(spec: LatticeSpec, direction: Direction) -> Self {
        let p = spec.p();
        Self {
            spec,
            direction,
            values: vec![Complex64::new(0.0, 0.0); p * p],
        }
    }

    /// Wraps storage-ordered values (length `p^2`, row-major in `(c1, c2)`).
    pub fn from_storage(
        spec: LatticeSpec,
        direction: Direction,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let p = spec.p();
        if values.len() != p * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", p * p),
                got: values.len().to_string(),
            });
        }
        Ok(Self { spec, direction, values })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at centered pixel coordinates (taken modulo `p`).
    pub fn get(&self, c1: i64, c2: i64) -> Complex64 {
        let p = self.spec.p();
        self.values[slot(c1, p) * p + slot(c2, p)]
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self {
            spec: self.spec,
            direction: self.direction,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// 2D DFTs of the `n` slices of an object taken along one family axis,
/// each zero-padded to `Z_p^2`.
pub struct SliceSpectra {
    spec: LatticeSpec,
    family: Family,
    /// `spectra[s]` belongs to the slice at centered index `centered(s, n)`.
    spectra: Vec<Vec<Complex64>>,
}

impl SliceSpectra {
    pub fn new(obj: &Object3D, family: Family) -> Self {
        let spec = *obj.spec();
        let (n, p) = (spec.n(), spec.p());
        let plan = fft2(p);
        let axis = family.axis();
        let (t1, t2) = family.transverse();
        let spectra = (0..n)
            .map(|s| {
                let i = centered(s, n);
                let mut buf = vec![Complex64::new(0.0, 0.0); p * p];
                for s1 in 0..n {
                    for s2 in 0..n {
                        let mut c = [0i64; 3];
                        c[axis] = i;
                        c[t1] = centered(s1, n);
                        c[t2] = centered(s2, n);
                        buf[slot(c[t1], p) * p + slot(c[t2], p)] = obj.get(c[0], c[1], c[2]);
                    }
                }
                plan.forward(&mut buf);
                buf
            })
            .collect();
        Self { spec, family, spectra }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// 2D DFT of the projection along `(alpha, beta)` of this family, i.e.
    /// the 3D spectrum on the slice plane through the origin.
    pub fn projection_spectrum(&self, alpha: f64, beta: f64) -> Vec<Complex64> {
        let (n, p) = (self.spec.n(), self.spec.p());
        let mut acc = vec![Complex64::new(0.0, 0.0); p * p];
        for (s, spec_i) in self.spectra.iter().enumerate() {
            let i = centered(s, n);
            if i == 0 {
                for (a, v) in acc.iter_mut().zip(spec_i) {
                    *a += v;
                }
                continue;
            }
            let (r1, r2) = slice_ramps(alpha, beta, i, p);
            for k1 in 0..p {
                let row = &spec_i[k1 * p..(k1 + 1) * p];
                let out = &mut acc[k1 * p..(k1 + 1) * p];
                for k2 in 0..p {
                    out[k2] += row[k2] * r1[k1] * r2[k2];
                }
            }
        }
        acc
    }
}

/// Per-axis factors of the ramp `exp(i 2 pi (alpha k1 + beta k2) i / p)`
/// over centered frequencies.
pub(crate) fn slice_ramps(alpha: f64, beta: f64, i: i64, p: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let ramp = |slope: f64| -> Vec<Complex64> {
        (0..p)
            .map(|s| {
                let k = centered(s, p) as f64;
                Complex64::from_polar(1.0, 2.0 * PI * slope * k * i as f64 / p as f64)
            })
            .collect()
    };
    (ramp(alpha), ramp(beta))
}

/// Adjoint of the projection, accumulated in the slice-spectrum domain.
///
/// Holds one `p x p` accumulator per slice; `add` folds in the DFT of a
/// projection-domain image and `finish` maps back to the object grid.
pub struct BackprojectionAccumulator {
    spec: LatticeSpec,
    family: Family,
    acc: Vec<Vec<Complex64>>,
}

impl BackprojectionAccumulator {
    pub fn new(spec: LatticeSpec, family: Family) -> Self {
        let (n, p) = (spec.n(), spec.p());
        Self {
            spec,
            family,
            acc: vec![vec![Complex64::new(0.0, 0.0); p * p]; n],
        }
    }

    /// Adds the adjoint of projection along `(alpha, beta)` applied to the
    /// image whose unnormalized 2D DFT is `image_spectrum`.
    pub fn add(&mut self, alpha: f64, beta: f64, image_spectrum: &[Complex64]) {
        let (n, p) = (self.spec.n(), self.spec.p());
        for (s, acc_i) in self.acc.iter_mut().enumerate() {
            let i = centered(s, n);
            let (r1, r2) = slice_ramps(alpha, beta, i, p);
            for k1 in 0..p {
                let row = &image_spectrum[k1 * p..(k1 + 1) * p];
                let out = &mut acc_i[k1 * p..(k1 + 1) * p];
                let c1 = r1[k1].conj();
                for k2 in 0..p {
                    out[k2] += row[k2] * c1 * r2[k2].conj();
                }
            }
        }
    }

    /// Adds the accumulated backprojection into `out`.
    pub fn finish_into(mut self, out: &mut Object3D) {
        let (n, p) = (self.spec.n(), self.spec.p());
        let plan = fft2(p);
        let axis = self.family.axis();
        let (t1, t2) = self.family.transverse();
        for (s, acc_i) in self.acc.iter_mut().enumerate() {
            plan.inverse_normalized(acc_i);
            let i = centered(s, n);
            for s1 in 0..n {
                for s2 in 0..n {
                    let mut c = [0i64; 3];
                    c[axis] = i;
                    c[t1] = centered(s1, n);
                    c[t2] = centered(s2, n);
                    let v = acc_i[slot(c[t1], p) * p + slot(c[t2], p)];
                    let cur = out.get(c[0], c[1], c[2]);
                    out.set(c[0], c[1], c[2], cur + v);
                }
            }
        }
    }
}

/// 2D DFT of the projection of `obj` along `dir` (the slice of the 3D DFT).
pub fn projection_spectrum(obj: &Object3D, dir: &Direction) -> Vec<Complex64> {
    SliceSpectra::new(obj, dir.family()).projection_spectrum(dir.alpha(), dir.beta())
}

/// Line sums of the band-limited interpolant of `obj` along `dir`.
pub fn project(obj: &Object3D, dir: &Direction) -> Projection2D {
    let mut values = projection_spectrum(obj, dir);
    fft2(obj.spec().p()).inverse_normalized(&mut values);
    Projection2D {
        spec: *obj.spec(),
        direction: *dir,
        values,
    }
}

/// Adjoint of [`project`]: maps an image on `Z_p^2` back onto `Z_n^3`.
pub fn backproject(image: &Projection2D) -> Object3D {
    let spec = *image.spec();
    let dir = image.direction();
    let mut spectrum = image.values().to_vec();
    fft2(spec.p()).forward(&mut spectrum);
    let mut acc = BackprojectionAccumulator::new(spec, dir.family());
    acc.add(dir.alpha(), dir.beta(), &spectrum);
    let mut out = Object3D::zeros(spec);
    acc.finish_into(&mut out);
    out
}

/// `exp(i kappa f_t)` elementwise; `f` may be complex.
pub fn phase_projection(obj: &Object3D, dir: &Direction) -> Projection2D {
    let kappa = obj.spec().kappa();
    let i = Complex64::new(0.0, 1.0);
    project(obj, dir).map(|v| (i * kappa * v).exp())
}

/// `(1 + i kappa f_t / q)^q` on the principal branch, `q >= 1`.
pub fn hybrid_projection(obj: &Object3D, dir: &Direction, q: f64) -> Result<Projection2D> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("hybrid order q = {q} must be >= 1")));
    }
    let kappa = obj.spec().kappa();
    let i = Complex64::new(0.0, 1.0);
    let proj = project(obj, dir);
    Ok(if q == 1.0 {
        proj.map(|v| 1.0 + i * kappa * v)
    } else {
        proj.map(|v| (1.0 + i * kappa * v / q).powf(q))
    })
}

/// Odd side lengths `(l_alpha, l_beta)` of the box that bounds the support
/// of the projections of objects in `O_n`.
pub fn support_bounds(dir: &Direction, spec: &LatticeSpec) -> (usize, usize) {
    let half = (spec.n() as f64 - 1.0) / 2.0;
    let side = |s: f64| 2 * ((1.0 + s.abs()) * half).floor() as usize + 1;
    (side(dir.alpha()), side(dir.beta()))
}

/// Whether pixel `(c1, c2)` lies in the support box of `dir`.
pub fn in_support_box(dir: &Direction, spec: &LatticeSpec, c1: i64, c2: i64) -> bool {
    let (la, lb) = support_bounds(dir, spec);
    contains(c1, la) && contains(c2, lb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{coords, interpolate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_object(spec: LatticeSpec, seed: u64, complex: bool) -> Object3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Object3D::from_fn(spec, |_, _, _| {
            let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
            Complex64::new(rng.random_range(-1.0..1.0), im)
        })
    }

    /// Line sums evaluated point by point through the interpolant.
    fn brute_force(obj: &Object3D, dir: &Direction) -> Vec<Complex64> {
        let p = obj.spec().p();
        let n = obj.n();
        let (a, b) = (dir.alpha(), dir.beta());
        let mut out = vec![Complex64::new(0.0, 0.0); p * p];
        for c1 in coords(p) {
            for c2 in coords(p) {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in coords(n) {
                    let t = i as f64;
                    let (u, v) = (a * t + c1 as f64, b * t + c2 as f64);
                    acc += match dir.family() {
                        Family::X => interpolate(obj, t, u, v),
                        Family::Y => interpolate(obj, u, t, v),
                        Family::Z => interpolate(obj, u, v, t),
                    };
                }
                out[slot(c1, p) * p + slot(c2, p)] = acc;
            }
        }
        out
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::x(1.0, 0.0).is_err());
        assert!(Direction::z(0.2, -1.0).is_err());
        assert!(Direction::y(0.999, -0.999).is_ok());
        let d = Direction::from_vector([0.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.family(), Family::Y);
        assert!(d.beta() < 1.0);
        assert!(d.angle_to(&Direction::from_vector([0.0, 1.0, 1.0 - 1e-17]).unwrap()) < 1e-12);
        let d = Direction::from_vector([0.2, -0.5, 2.0]).unwrap();
        assert_eq!(d.family(), Family::Z);
        assert!((d.alpha() - 0.1).abs() < 1e-15 && (d.beta() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn axis_aligned_projection_is_column_sum() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let obj = random_object(spec, 1, true);
        let proj = project(&obj, &Direction::z(0.0, 0.0).unwrap());
        for c1 in coords(9) {
            for c2 in coords(9) {
                let expected: Complex64 = coords(5).map(|k| obj.get(c1, c2, k)).sum();
                assert!((proj.get(c1, c2) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_object_projects_to_delta() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let mut obj = Object3D::zeros(spec);
        obj.set(0, 0, 0, Complex64::new(1.0, 0.0));
        let dir = Direction::x(0.41, -0.73).unwrap();
        let proj = project(&obj, &dir);
        let oracle = brute_force(&obj, &dir);
        for c1 in coords(9) {
            for c2 in coords(9) {
                let expected = crate::lattice::dirichlet_kernel(c1 as f64, 9)
                    * crate::lattice::dirichlet_kernel(c2 as f64, 9);
                assert!((proj.get(c1, c2) - expected).norm() < 1e-12);
                assert!((oracle[slot(c1, 9) * 9 + slot(c2, 9)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_path_matches_brute_force() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let obj = random_object(spec, 2, true);
        for dir in [
            Direction::x(0.37, -0.52).unwrap(),
            Direction::y(-0.9, 0.15).unwrap(),
            Direction::z(0.6, 0.61).unwrap(),
        ] {
            let fast = project(&obj, &dir);
            let slow = brute_force(&obj, &dir);
            let scale = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = fast
                .values()
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10 * scale, "{dir:?}: {err}");
        }
    }

    #[test]
    fn backprojection_is_adjoint() {
        let spec = LatticeSpec::new(5, 11, PI).unwrap();
        let f = random_object(spec, 4, true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dir = Direction::y(0.3, -0.8).unwrap();
        let y: Vec<Complex64> = (0..121)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let y = Projection2D::from_storage(spec, dir, y).unwrap();
        let lhs: Complex64 = project(&f, &dir)
            .values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| a * b.conj())
            .sum();
        let bp = backproject(&y);
        let rhs: Complex64 = f.values().iter().zip(bp.values()).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
    }

    #[test]
    fn phase_projection_cases() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let dir = Direction::x(0.2, 0.3).unwrap();
        let zero = phase_projection(&Object3D::zeros(spec), &dir);
        assert!(zero.values().iter().all(|v| (v - 1.0).norm() < 1e-15));

        // column of two voxels of value 1 projects to 2 -> exp(2 pi i) = 1
        let mut obj = Object3D::zeros(spec);
        obj.set(0, 0, 0, Complex64::new(1.0, 0.0));
        obj.set(0, 0, 1, Complex64::new(1.0, 0.0));
        let ph = phase_projection(&obj, &Direction::z(0.0, 0.0).unwrap());
        assert!((ph.get(0, 0) - 1.0).norm() < 1e-12);

        let obj = random_object(spec, 6, true);
        let dir = Direction::z(-0.3, 0.45).unwrap();
        let direct = phase_projection(&obj, &dir);
        let composed = project(&obj, &dir);
        for (a, b) in direct.values().iter().zip(composed.values()) {
            let expected = (Complex64::new(0.0, PI) * b).exp();
            assert!((a - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn hybrid_projection_cases() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let dir = Direction::y(0.1, -0.4).unwrap();
        assert!(hybrid_projection(&Object3D::zeros(spec), &dir, 0.5).is_err());
        let ones = hybrid_projection(&Object3D::zeros(spec), &dir, 3.0).unwrap();
        assert!(ones.values().iter().all(|v| (v - 1.0).norm() < 1e-15));

        let obj = random_object(spec, 7, true);
        let weak = hybrid_projection(&obj, &dir, 1.0).unwrap();
        let proj = project(&obj, &dir);
        for (w, f) in weak.values().iter().zip(proj.values()) {
            assert_eq!(*w, 1.0 + Complex64::new(0.0, PI) * f);
        }

        let small = random_object(spec, 8, false).scaled(Complex64::new(0.05, 0.0));
        let strong = phase_projection(&small, &dir);
        let near = hybrid_projection(&small, &dir, 1e6).unwrap();
        for (a, b) in strong.values().iter().zip(near.values()) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn support_bound_values() {
        let spec = LatticeSpec::new(7, 13, PI).unwrap();
        assert_eq!(support_bounds(&Direction::x(0.0, 0.0).unwrap(), &spec), (7, 7));
        assert_eq!(support_bounds(&Direction::x(0.5, -0.5).unwrap(), &spec), (9, 9));
        assert_eq!(support_bounds(&Direction::x(0.99, 0.0).unwrap(), &spec), (11, 7));
    }

    #[test]
    fn linearity_and_dc() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let f = random_object(spec, 9, true);
        let g = random_object(spec, 10, true);
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
        let combo = f.scaled(a).axpy(b, &g).unwrap();
        let dir = Direction::z(0.77, -0.12).unwrap();
        let lhs = project(&combo, &dir);
        let (pf, pg) = (project(&f, &dir), project(&g, &dir));
        for ((l, x), y) in lhs.values().iter().zip(pf.values()).zip(pg.values()) {
            assert!((l - (a * x + b * y)).norm() < 1e-12);
        }
        let total: Complex64 = pf.values().iter().sum();
        assert!((total - f.sum()).norm() < 1e-10 * f.sum().norm());
    }

    #[test]
    fn continuity_in_direction() {
        let spec = LatticeSpec::new(5, 9, PI).unwrap();
        let f = random_object(spec, 12, true);
        let max_f = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let a = project(&f, &Direction::x(0.3, 0.2).unwrap());
        let b = project(&f, &Direction::x(0.3 + 1e-6, 0.2 - 1e-6).unwrap());
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3 * 5.0 * max_f);
    }
}
