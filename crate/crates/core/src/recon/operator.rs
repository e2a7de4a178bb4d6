use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::lattice::{centered, slot, LatticeSpec, Object3D};
use crate::measurement::{crop, pad, PhaseMask};
use crate::projector::{slice_ramps, BackprojectionAccumulator, Direction, Family, SliceSpectra};
use crate::tilt::TiltScheme;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperatorFlags {
    /// Sample the diffraction patterns on `Z_{2p-1}^2` instead of `Z_p^2`.
    pub oversampled: bool,
    /// Restrict the object to real values in the range projection.
    pub real_constraint: bool,
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Normal operator of the ray transform restricted to one family,
/// diagonalized per slice pair in the 2D Fourier domain.
struct FamilyBlock {
    family: Family,
    members: Vec<usize>,
    /// `kernels[d + n - 1][k] = sum_t exp(i 2 pi (alpha_t k1 + beta_t k2) d / p)`.
    kernels: Vec<Vec<Complex64>>,
}

impl FamilyBlock {
    fn new(family: Family, members: Vec<usize>, dirs: &[Direction], spec: &LatticeSpec) -> Self {
        let (n, p) = (spec.n() as i64, spec.p());
        let kernels = (-(n - 1)..n)
            .into_par_iter()
            .map(|d| {
                let mut h = vec![ZERO; p * p];
                for &t in &members {
                    let (r1, r2) = slice_ramps(dirs[t].alpha(), dirs[t].beta(), d, p);
                    for k1 in 0..p {
                        for k2 in 0..p {
                            h[k1 * p + k2] += r1[k1] * r2[k2];
                        }
                    }
                }
                h
            })
            .collect();
        Self {
            family,
            members,
            kernels,
        }
    }
}

/// `f -> (DFT(pad(mask * project(f, t))))_t`, stacked in scheme order.
pub struct MeasurementOperator {
    spec: LatticeSpec,
    directions: Vec<Direction>,
    mask: Option<Vec<Complex64>>,
    flags: OperatorFlags,
    blocks: Vec<FamilyBlock>,
    cg_tol: f64,
    cg_max_iters: usize,
}

pub const DEFAULT_CG_TOL: f64 = 1e-10;
pub const DEFAULT_CG_MAX_ITERS: usize = 200;

impl MeasurementOperator {
    pub fn new(scheme: &TiltScheme, mask: Option<&PhaseMask>, spec: LatticeSpec, flags: OperatorFlags) -> Result<Self> {
        if scheme.is_empty() {
            return Err(Error::InvalidArgument("measurement operator needs at least one direction".into()));
        }
        let mask = match mask {
            Some(m) if m.spec().p() != spec.p() => return Err(Error::LatticeMismatch),
            Some(m) => Some(m.values()),
            None => None,
        };
        let directions = scheme.directions().to_vec();
        let blocks = Family::ALL
            .iter()
            .filter_map(|&f| {
                let members = scheme.family_indices(f);
                (!members.is_empty()).then(|| FamilyBlock::new(f, members, &directions, &spec))
            })
            .collect();
        Ok(Self {
            spec,
            directions,
            mask,
            flags,
            blocks,
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iters: DEFAULT_CG_MAX_ITERS,
        })
    }

    pub fn with_cg(mut self, tol: f64, max_iters: usize) -> Self {
        self.cg_tol = tol;
        self.cg_max_iters = max_iters;
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn flags(&self) -> OperatorFlags {
        self.flags
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Side of each diffraction grid.
    pub fn grid_len(&self) -> usize {
        if self.flags.oversampled {
            2 * self.spec.p() - 1
        } else {
            self.spec.p()
        }
    }

    /// Length of the stacked data vector.
    pub fn data_len(&self) -> usize {
        let g = self.grid_len();
        self.directions.len() * g * g
    }

    fn check_object(&self, f: &Object3D) -> Result<()> {
        if f.spec() != &self.spec {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    fn check_data(&self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.data_len() {
            return Err(Error::ShapeMismatch {
                expected: self.data_len().to_string(),
                got: y.len().to_string(),
            });
        }
        Ok(())
    }

    /// Ray projections of `f` for every direction, in scheme order.
    pub fn project_all(&self, f: &Object3D) -> Result<Vec<Vec<Complex64>>> {
        self.check_object(f)?;
        let p = self.spec.p();
        let spectra: Vec<(Family, SliceSpectra)> = self
            .blocks
            .par_iter()
            .map(|b| (b.family, SliceSpectra::new(f, b.family)))
            .collect();
        Ok(self
            .directions
            .par_iter()
            .map(|d| {
                let s = &spectra.iter().find(|(fam, _)| *fam == d.family()).expect("family block").1;
                let mut v = s.projection_spectrum(d.alpha(), d.beta());
                fft2(p).inverse_normalized(&mut v);
                v
            })
            .collect())
    }

    /// The measurement map `A f`.
    pub fn forward(&self, f: &Object3D) -> Result<Vec<Complex64>> {
        let p = self.spec.p();
        let g = self.grid_len();
        let projections = self.project_all(f)?;
        let blocks: Vec<Vec<Complex64>> = projections
            .into_par_iter()
            .map(|mut v| {
                if let Some(m) = &self.mask {
                    v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                let mut buf = pad(&v, p, g);
                fft2(g).forward(&mut buf);
                buf
            })
            .collect();
        Ok(blocks.concat())
    }

    /// `Q_t^* y_t / N^2` for every direction: unmasked projection-domain images.
    fn unitary_stage_inverse(&self, y: &[Complex64]) -> Vec<Vec<Complex64>> {
        let p = self.spec.p();
        let g = self.grid_len();
        y.par_chunks(g * g)
            .map(|chunk| {
                let mut buf = chunk.to_vec();
                fft2(g).inverse_normalized(&mut buf);
                let mut v = crop(&buf, p, g);
                if let Some(m) = &self.mask {
                    v.iter_mut().zip(m).for_each(|(a, b)| *a *= b.conj());
                }
                v
            })
            .collect()
    }

    /// Adjoint of the ray transform applied to per-direction images.
    fn backproject_all(&self, images: &[Vec<Complex64>]) -> Object3D {
        let p = self.spec.p();
        let spectra: Vec<Vec<Complex64>> = images
            .par_iter()
            .map(|v| {
                let mut s = v.clone();
                fft2(p).forward(&mut s);
                s
            })
            .collect();
        let parts: Vec<Object3D> = self
            .blocks
            .par_iter()
            .map(|b| {
                let mut acc = BackprojectionAccumulator::new(self.spec, b.family);
                for &t in &b.members {
                    let d = &self.directions[t];
                    acc.add(d.alpha(), d.beta(), &spectra[t]);
                }
                let mut out = Object3D::zeros(self.spec);
                acc.finish_into(&mut out);
                out
            })
            .collect();
        sum_objects(self.spec, parts)
    }

    /// The exact adjoint `A^* y`.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<Object3D> {
        self.check_data(y)?;
        let g = self.grid_len() as f64;
        let images = self.unitary_stage_inverse(y);
        let mut out = self.backproject_all(&images);
        out.values_mut().iter_mut().for_each(|v| *v *= g * g);
        Ok(out)
    }

    /// `R^* R f`, the normal operator of the ray transform.
    pub fn normal(&self, f: &Object3D) -> Result<Object3D> {
        self.check_object(f)?;
        let (n, p) = (self.spec.n(), self.spec.p());
        let plan = fft2(p);
        let parts: Vec<Object3D> = self
            .blocks
            .par_iter()
            .map(|b| {
                let (axis, (t1, t2)) = (b.family.axis(), b.family.transverse());
                let coord = |i: i64, a: i64, c: i64| {
                    let mut x = [0i64; 3];
                    x[axis] = i;
                    x[t1] = a;
                    x[t2] = c;
                    x
                };
                let slices: Vec<Vec<Complex64>> = (0..n)
                    .map(|s| {
                        let i = centered(s, n);
                        let mut buf = vec![ZERO; p * p];
                        for s1 in 0..n {
                            for s2 in 0..n {
                                let (a, c) = (centered(s1, n), centered(s2, n));
                                let x = coord(i, a, c);
                                buf[slot(a, p) * p + slot(c, p)] = f.get(x[0], x[1], x[2]);
                            }
                        }
                        plan.forward(&mut buf);
                        buf
                    })
                    .collect();
                let mut out = Object3D::zeros(self.spec);
                for so in 0..n {
                    let io = centered(so, n);
                    let mut acc = vec![ZERO; p * p];
                    for (si, fi) in slices.iter().enumerate() {
                        let d = centered(si, n) - io;
                        let h = &b.kernels[(d + n as i64 - 1) as usize];
                        for ((a, hv), fv) in acc.iter_mut().zip(h).zip(fi) {
                            *a += hv * fv;
                        }
                    }
                    plan.inverse_normalized(&mut acc);
                    for s1 in 0..n {
                        for s2 in 0..n {
                            let (a, c) = (centered(s1, n), centered(s2, n));
                            let x = coord(io, a, c);
                            out.set(x[0], x[1], x[2], acc[slot(a, p) * p + slot(c, p)]);
                        }
                    }
                }
                out
            })
            .collect();
        Ok(sum_objects(self.spec, parts))
    }

    /// `R^* R f` for real `f`; the imaginary part of `f` is ignored.
    /// Packs two slices per transform and mixes on half the frequency plane.
    pub fn normal_real(&self, f: &Object3D) -> Result<Object3D> {
        self.check_object(f)?;
        let (n, p) = (self.spec.n(), self.spec.p());
        let plan = fft2(p);
        let mirror = |k: usize| ((p - k / p) % p) * p + (p - k % p) % p;
        let half: Vec<usize> = (0..p * p).filter(|&k| k <= mirror(k)).collect();
        let pairs = n.div_ceil(2);
        let parts: Vec<Object3D> = self
            .blocks
            .par_iter()
            .map(|b| {
                let (axis, (t1, t2)) = (b.family.axis(), b.family.transverse());
                let coord = |i: i64, a: i64, c: i64| {
                    let mut x = [0i64; 3];
                    x[axis] = i;
                    x[t1] = a;
                    x[t2] = c;
                    x
                };
                let mut slices = vec![vec![ZERO; p * p]; n];
                for j in 0..pairs {
                    let mut buf = vec![ZERO; p * p];
                    for (part, s) in [(0, 2 * j), (1, 2 * j + 1)] {
                        if s >= n {
                            continue;
                        }
                        let i = centered(s, n);
                        for s1 in 0..n {
                            for s2 in 0..n {
                                let (a, c) = (centered(s1, n), centered(s2, n));
                                let x = coord(i, a, c);
                                let v = f.get(x[0], x[1], x[2]).re;
                                let slot_k = slot(a, p) * p + slot(c, p);
                                if part == 0 {
                                    buf[slot_k].re = v;
                                } else {
                                    buf[slot_k].im = v;
                                }
                            }
                        }
                    }
                    plan.forward(&mut buf);
                    for &k in &half {
                        let (g, gm) = (buf[k], buf[mirror(k)].conj());
                        slices[2 * j][k] = (g + gm) * 0.5;
                        if 2 * j + 1 < n {
                            slices[2 * j + 1][k] = (g - gm) * Complex64::new(0.0, -0.5);
                        }
                    }
                }
                let mut out = Object3D::zeros(self.spec);
                let mut acc = vec![ZERO; 2 * p * p];
                for j in 0..pairs {
                    acc.iter_mut().for_each(|v| *v = ZERO);
                    let outs: Vec<usize> = [2 * j, 2 * j + 1].into_iter().filter(|&s| s < n).collect();
                    for (slot_o, &so) in outs.iter().enumerate() {
                        let io = centered(so, n);
                        let target = &mut acc[slot_o * p * p..(slot_o + 1) * p * p];
                        for (si, fi) in slices.iter().enumerate() {
                            let d = centered(si, n) - io;
                            let h = &b.kernels[(d + n as i64 - 1) as usize];
                            for &k in &half {
                                target[k] += h[k] * fi[k];
                            }
                        }
                    }
                    let (oa, ob) = acc.split_at(p * p);
                    let mut buf = vec![ZERO; p * p];
                    let i_unit = Complex64::new(0.0, 1.0);
                    for &k in &half {
                        let m = mirror(k);
                        buf[k] = oa[k] + i_unit * ob[k];
                        buf[m] = oa[k].conj() + i_unit * ob[k].conj();
                    }
                    plan.inverse_normalized(&mut buf);
                    for (slot_o, &so) in outs.iter().enumerate() {
                        let io = centered(so, n);
                        for s1 in 0..n {
                            for s2 in 0..n {
                                let (a, c) = (centered(s1, n), centered(s2, n));
                                let x = coord(io, a, c);
                                let v = buf[slot(a, p) * p + slot(c, p)];
                                let re = if slot_o == 0 { v.re } else { v.im };
                                out.set(x[0], x[1], x[2], Complex64::new(re, 0.0));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        Ok(sum_objects(self.spec, parts))
    }

    /// Least-squares inverse `A^+ y`, warm-started from `start` when given.
    pub fn pinv(&self, y: &[Complex64], start: Option<&Object3D>) -> Result<(Object3D, CgInfo)> {
        self.check_data(y)?;
        let images = self.unitary_stage_inverse(y);
        let rhs = self.backproject_all(&images);
        self.solve_normal(&rhs, start)
    }

    /// `Re A^+ y`, solved entirely in real arithmetic.
    pub fn pinv_real(&self, y: &[Complex64], start: Option<&Object3D>) -> Result<(Object3D, CgInfo)> {
        self.check_data(y)?;
        let images = self.unitary_stage_inverse(y);
        let rhs = self.backproject_all(&images).real_part();
        let start = start.map(Object3D::real_part);
        self.conjugate_gradients(&rhs, start.as_ref(), |x| self.normal_real(x))
    }

    /// Conjugate gradients on `R^* R f = rhs`.
    pub fn solve_normal(&self, rhs: &Object3D, start: Option<&Object3D>) -> Result<(Object3D, CgInfo)> {
        self.conjugate_gradients(rhs, start, |x| self.normal(x))
    }

    fn conjugate_gradients<F>(&self, rhs: &Object3D, start: Option<&Object3D>, apply: F) -> Result<(Object3D, CgInfo)>
    where
        F: Fn(&Object3D) -> Result<Object3D>,
    {
        self.check_object(rhs)?;
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            let info = CgInfo {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            };
            return Ok((Object3D::zeros(self.spec), info));
        }
        let mut x = match start {
            Some(s) => {
                self.check_object(s)?;
                s.clone()
            }
            None => Object3D::zeros(self.spec),
        };
        let mut r: Vec<Complex64> = if start.is_some() {
            let ax = apply(&x)?;
            rhs.values().iter().zip(ax.values()).map(|(b, a)| b - a).collect()
        } else {
            rhs.values().to_vec()
        };
        let mut dir = Object3D::from_storage(self.spec, r.clone())?;
        let mut rr: f64 = r.iter().map(|v| v.norm_sqr()).sum();
        let mut iterations = 0;
        while rr.sqrt() > self.cg_tol * rhs_norm && iterations < self.cg_max_iters {
            let ad = apply(&dir)?;
            let dad: f64 = dir.values().iter().zip(ad.values()).map(|(d, a)| (d.conj() * a).re).sum();
            if !(dad > 0.0) {
                break;
            }
            let step = rr / dad;
            x.values_mut().iter_mut().zip(dir.values()).for_each(|(xv, dv)| *xv += step * dv);
            r.iter_mut().zip(ad.values()).for_each(|(rv, av)| *rv -= step * av);
            let rr_new: f64 = r.iter().map(|v| v.norm_sqr()).sum();
            let beta = rr_new / rr;
            dir.values_mut().iter_mut().zip(&r).for_each(|(dv, rv)| *dv = rv + beta * *dv);
            rr = rr_new;
            iterations += 1;
        }
        let relative_residual = rr.sqrt() / rhs_norm;
        Ok((
            x,
            CgInfo {
                iterations,
                relative_residual,
                converged: relative_residual <= self.cg_tol,
            },
        ))
    }

    /// `P_1 y = A A^+ y`, or `A Re A^+ y` under the real constraint.
    /// Returns the projected data and the object it comes from.
    pub fn range_projection(&self, y: &[Complex64], start: Option<&Object3D>) -> Result<(Vec<Complex64>, Object3D, CgInfo)> {
        let (f, info) = if self.flags.real_constraint {
            self.pinv_real(y, start)?
        } else {
            self.pinv(y, start)?
        };
        Ok((self.forward(&f)?, f, info))
    }
}

fn sum_objects(spec: LatticeSpec, parts: Vec<Object3D>) -> Object3D {
    let mut iter = parts.into_iter();
    let mut out = iter.next().unwrap_or_else(|| Object3D::zeros(spec));
    for part in iter {
        out.values_mut().iter_mut().zip(part.values()).for_each(|(a, b)| *a += b);
    }
    out
}
