use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::lattice::{centered, contains, slot, LatticeSpec, Object3D};
use crate::projector::{Direction, Family, Projection2D};
use crate::tilt::{diversity_check_family, vandermonde_lstsq, vandermonde_solve_with, DEFAULT_NODE_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Result of a Vandermonde reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tomogram {
    pub object: Object3D,
    pub family: Family,
    /// Number of projections used (those of `family`).
    pub used: usize,
    /// Worst relative residual over the per-frequency solves.
    pub max_residual: f64,
}

/// Slices along the family axis on the full `Z_p^2` transverse grid.
pub(crate) struct SliceStack {
    pub family: Family,
    /// `slices[s]` is the slice at centered index `centered(s, n)`, storage order on `Z_p^2`.
    pub slices: Vec<Vec<Complex64>>,
    pub max_residual: f64,
}

fn pick_family(projections: &[Projection2D], n: usize) -> Result<(Family, Vec<&Projection2D>)> {
    let (family, count) = Family::ALL
        .iter()
        .map(|&f| (f, projections.iter().filter(|p| p.direction().family() == f).count()))
        .fold((Family::X, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if count < n {
        return Err(Error::InsufficientDirections { needed: n, found: count });
    }
    Ok((family, projections.iter().filter(|p| p.direction().family() == family).collect()))
}

/// Solves for the 2D spectra of every slice at all nonzero frequencies,
/// then fixes each slice's mean. Slices other than the central one must
/// vanish outside `Z_n^2`; the central slice takes up the remaining total.
/// With `confine` set, the central slice is also confined to `Z_n^2`.
pub(crate) fn solve_slices(projections: &[&Projection2D], spec: &LatticeSpec, confine: bool) -> Result<SliceStack> {
    let (n, p) = (spec.n(), spec.p());
    let family = projections[0].direction().family();
    let dirs: Vec<Direction> = projections.iter().map(|q| *q.direction()).collect();
    let report = diversity_check_family(&dirs, spec, DEFAULT_NODE_TOL)?;
    if !report.satisfied {
        return Err(Error::DiversityFailure(Box::new(report)));
    }
    let plan = fft2(p);
    let spectra: Vec<Vec<Complex64>> = projections
        .par_iter()
        .map(|q| {
            let mut v = q.values().to_vec();
            plan.forward(&mut v);
            v
        })
        .collect();

    let rows: Vec<Result<(Vec<Vec<Complex64>>, f64)>> = (0..p)
        .into_par_iter()
        .map(|s1| {
            let k1 = centered(s1, p) as f64;
            let mut row = vec![vec![ZERO; n]; p];
            let mut worst: f64 = 0.0;
            for (s2, cell) in row.iter_mut().enumerate() {
                if s1 == 0 && s2 == 0 {
                    continue;
                }
                let k2 = centered(s2, p) as f64;
                let nodes: Vec<f64> = dirs.iter().map(|d| -(d.alpha() * k1 + d.beta() * k2)).collect();
                let rhs: Vec<Complex64> = spectra.iter().map(|s| s[s1 * p + s2]).collect();
                let sol = if nodes.len() == n {
                    vandermonde_solve_with(&nodes, &rhs, spec, DEFAULT_NODE_TOL)?
                } else {
                    vandermonde_lstsq(&nodes, &rhs, spec)?
                };
                worst = worst.max(sol.residual);
                *cell = sol.x;
            }
            Ok((row, worst))
        })
        .collect();

    let mut slices = vec![vec![ZERO; p * p]; n];
    let mut max_residual: f64 = 0.0;
    for (s1, row) in rows.into_iter().enumerate() {
        let (row, worst) = row?;
        max_residual = max_residual.max(worst);
        for (s2, x) in row.into_iter().enumerate() {
            for (s, v) in x.into_iter().enumerate() {
                slices[s][s1 * p + s2] = v;
            }
        }
    }

    let total = spectra.iter().map(|s| s[0]).sum::<Complex64>() / spectra.len() as f64;
    let outside: Vec<usize> = (0..p * p)
        .filter(|&k| !(contains(centered(k / p, p), n) && contains(centered(k % p, p), n)))
        .collect();
    let mut others = ZERO;
    for (s, slice) in slices.iter_mut().enumerate() {
        plan.inverse_normalized(slice);
        if s == 0 && !confine {
            continue;
        }
        let shift = outside.iter().map(|&k| slice[k]).sum::<Complex64>() / outside.len() as f64;
        slice.iter_mut().for_each(|v| *v -= shift);
        if s != 0 {
            others += slice.iter().sum::<Complex64>();
        }
    }
    if !confine {
        let central = &mut slices[0];
        let shift = (total - others - central.iter().sum::<Complex64>()) / (p * p) as f64;
        central.iter_mut().for_each(|v| *v += shift);
    }
    Ok(SliceStack {
        family,
        slices,
        max_residual,
    })
}

/// Crops a slice stack to the object lattice.
pub(crate) fn stack_to_object(stack: &SliceStack, spec: &LatticeSpec) -> Object3D {
    let (n, p) = (spec.n(), spec.p());
    let axis = stack.family.axis();
    let (t1, t2) = stack.family.transverse();
    let mut obj = Object3D::zeros(*spec);
    for (s, slice) in stack.slices.iter().enumerate() {
        for s1 in 0..n {
            for s2 in 0..n {
                let mut c = [0i64; 3];
                c[axis] = centered(s, n);
                c[t1] = centered(s1, n);
                c[t2] = centered(s2, n);
                obj.set(c[0], c[1], c[2], slice[slot(c[t1], p) * p + slot(c[t2], p)]);
            }
        }
    }
    obj
}

/// Exact reconstruction from same-family projections.
///
/// Uses the family with the most projections. Exactly `n` projections
/// give square Vandermonde systems; more are combined by least squares.
pub fn vandermonde_tomography(projections: &[Projection2D], spec: &LatticeSpec) -> Result<Object3D> {
    Ok(vandermonde_tomography_report(projections, spec)?.object)
}

pub fn vandermonde_tomography_report(projections: &[Projection2D], spec: &LatticeSpec) -> Result<Tomogram> {
    if projections.iter().any(|q| q.spec() != spec) {
        return Err(Error::LatticeMismatch);
    }
    let (family, chosen) = pick_family(projections, spec.n())?;
    let stack = solve_slices(&chosen, spec, true)?;
    Ok(Tomogram {
        object: stack_to_object(&stack, spec),
        family,
        used: chosen.len(),
        max_residual: stack.max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::project;
    use crate::tilt::{random_tilt_scheme, SamplingRegion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_object(spec: LatticeSpec, seed: u64) -> Object3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Object3D::from_fn(spec, |_, _, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rel_err(a: &Object3D, b: &Object3D) -> f64 {
        a.axpy(Complex64::new(-1.0, 0.0), b).unwrap().norm() / b.norm()
    }

    fn z_box() -> SamplingRegion {
        SamplingRegion::SlopeBox { family: Family::Z, lo: -1.0, hi: 1.0 }
    }

    #[test]
    fn exact_recovery_from_n_projections() {
        for n in [3usize, 5] {
            let spec = LatticeSpec::with_n(n).unwrap();
            let f = random_object(spec, n as u64);
            let scheme = random_tilt_scheme(n, z_box(), n, 40 + n as u64, false).unwrap();
            let projs: Vec<Projection2D> = scheme.directions().iter().map(|d| project(&f, d)).collect();
            let g = vandermonde_tomography(&projs, &spec).unwrap();
            assert!(rel_err(&g, &f) < 1e-8, "n = {n}: {}", rel_err(&g, &f));
        }
    }

    #[test]
    fn overdetermined_recovery() {
        let spec = LatticeSpec::new(4, 9, PI).unwrap();
        let f = random_object(spec, 3);
        let scheme = random_tilt_scheme(4, SamplingRegion::default(), 12, 4, false).unwrap();
        let projs: Vec<Projection2D> = scheme.directions().iter().map(|d| project(&f, d)).collect();
        let g = vandermonde_tomography(&projs, &spec).unwrap();
        assert!(rel_err(&g, &f) < 1e-10);
    }

    #[test]
    fn zero_projections_give_zero() {
        let spec = LatticeSpec::with_n(3).unwrap();
        let scheme = random_tilt_scheme(3, z_box(), 3, 1, false).unwrap();
        let projs: Vec<Projection2D> = scheme.directions().iter().map(|d| Projection2D::zeros(spec, *d)).collect();
        let g = vandermonde_tomography(&projs, &spec).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn too_few_projections_refused() {
        let spec = LatticeSpec::with_n(5).unwrap();
        let f = random_object(spec, 1);
        let scheme = random_tilt_scheme(4, z_box(), 4, 2, false).unwrap();
        let projs: Vec<Projection2D> = scheme.directions().iter().map(|d| project(&f, d)).collect();
        assert!(matches!(
            vandermonde_tomography(&projs, &spec),
            Err(Error::InsufficientDirections { needed: 5, found: 4 })
        ));
    }

    #[test]
    fn non_diverse_scheme_refused() {
        let spec = LatticeSpec::new(3, 13, PI).unwrap();
        let f = random_object(spec, 1);
        let dirs = [
            Direction::z(0.0, 0.0).unwrap(),
            Direction::z(0.2, 0.2).unwrap(),
            Direction::z(0.5, -0.3).unwrap(),
        ];
        let projs: Vec<Projection2D> = dirs.iter().map(|d| project(&f, d)).collect();
        assert!(matches!(vandermonde_tomography(&projs, &spec), Err(Error::DiversityFailure(_))));
    }

    #[test]
    fn unconfined_stack_keeps_central_plane_offsets() {
        let spec = LatticeSpec::new(3, 7, PI).unwrap();
        let f = random_object(spec, 5);
        let scheme = random_tilt_scheme(3, SamplingRegion::default(), 9, 6, false).unwrap();
        let mut plane = vec![ZERO; 49];
        plane[slot(3, 7) * 7 + slot(-2, 7)] = Complex64::new(2.0, 0.0);
        plane[slot(0, 7) * 7 + slot(1, 7)] = Complex64::new(-4.0, 0.0);
        let projs: Vec<Projection2D> = scheme
            .directions()
            .iter()
            .map(|d| {
                let base = project(&f, d);
                let vals = base.values().iter().zip(&plane).map(|(a, b)| a + b).collect();
                Projection2D::from_storage(spec, *d, vals).unwrap()
            })
            .collect();
        let refs: Vec<&Projection2D> = projs.iter().collect();
        let stack = solve_slices(&refs, &spec, false).unwrap();
        let obj = stack_to_object(&stack, &spec);
        // pixel (0, 1) of the central x-slice is voxel (0, 0, 1)
        let extra = obj.get(0, 0, 1) - f.get(0, 0, 1);
        assert!((extra - Complex64::new(-4.0, 0.0)).norm() < 1e-9, "{extra}");
        let outside = stack.slices[0][slot(3, 7) * 7 + slot(-2, 7)];
        assert!((outside - Complex64::new(2.0, 0.0)).norm() < 1e-9, "{outside}");
    }
}
