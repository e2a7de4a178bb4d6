//! Fast numerical self-checks of the installed library.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io;
use crate::lattice::{dirichlet_kernel, LatticeSpec, Object3D};
use crate::measurement::random_phase_mask;
use crate::phantom::random_phantom;
use crate::projector::{backproject, project, Direction};
use crate::recon::{ap_reconstruct, correlation, vandermonde_tomography, MeasurementOperator, OperatorFlags};
use crate::tilt::tset_scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64, larger_is_better: bool) -> Check {
    let passed = if larger_is_better { value > bound } else { value < bound };
    let rel = if larger_is_better { ">" } else { "<" };
    Check {
        name,
        passed,
        detail: format!("{value:.3e} (need {rel} {bound:e})"),
    }
}

fn random_object(spec: LatticeSpec, seed: u64) -> Object3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Object3D::from_fn(spec, |_, _, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn kernel_check() -> Check {
    let p = 13;
    let worst = (-(p as i64)..=p as i64)
        .map(|m| {
            let want = if m.rem_euclid(p as i64) == 0 { 1.0 } else { 0.0 };
            (dirichlet_kernel(m as f64, p) - want).abs()
        })
        .fold(0.0, f64::max);
    check("dirichlet kernel at integers", worst, 1e-12, false)
}

fn projector_adjoint() -> Result<Check> {
    let spec = LatticeSpec::with_n(6)?;
    let f = random_object(spec, 1);
    let dir = Direction::y(0.37, -0.81)?;
    let g = project(&random_object(spec, 2), &dir);
    let lhs = dot(project(&f, &dir).values(), g.values());
    let rhs = dot(f.values(), backproject(&g).values());
    Ok(check("projector adjoint identity", (lhs - rhs).norm() / lhs.norm(), 1e-10, false))
}

fn tomography_round_trip() -> Result<Check> {
    let spec = LatticeSpec::with_n(5)?;
    let truth = random_object(spec, 3);
    let scheme = tset_scheme(5, 4)?;
    let data: Vec<_> = scheme.directions().iter().map(|d| project(&truth, d)).collect();
    let rec = vandermonde_tomography(&data, &spec)?;
    let diff = rec.axpy(Complex64::new(-1.0, 0.0), &truth)?;
    Ok(check("vandermonde tomography round trip", diff.norm() / truth.norm(), 1e-8, false))
}

fn operator_adjoint() -> Result<Check> {
    let spec = LatticeSpec::with_n(5)?;
    let scheme = tset_scheme(5, 5)?;
    let mask = random_phase_mask(spec, 6);
    let flags = OperatorFlags {
        oversampled: true,
        real_constraint: false,
    };
    let op = MeasurementOperator::new(&scheme, Some(&mask), spec, flags)?;
    let f = random_object(spec, 7);
    let y = op.forward(&random_object(spec, 8))?;
    let lhs = dot(&op.forward(&f)?, &y);
    let rhs = dot(f.values(), op.adjoint(&y)?.values());
    Ok(check("measurement operator adjoint identity", (lhs - rhs).norm() / lhs.norm(), 1e-10, false))
}

fn phase_retrieval() -> Result<Check> {
    let spec = LatticeSpec::with_n(5)?;
    let scheme = tset_scheme(5, 9)?;
    let mask = random_phase_mask(spec, 10);
    let flags = OperatorFlags {
        oversampled: false,
        real_constraint: true,
    };
    let op = MeasurementOperator::new(&scheme, Some(&mask), spec, flags)?;
    let truth = random_phantom(spec, 11);
    let b: Vec<f64> = op.forward(&truth)?.iter().map(|v| v.norm()).collect();
    let report = ap_reconstruct(&op, &b, 12, 300, None)?;
    Ok(check("noiseless phase retrieval correlation", correlation(&truth, &report.final_object)?, 0.99, true))
}

fn formats() -> Result<Check> {
    let spec = LatticeSpec::with_n(4)?;
    let f = random_object(spec, 13);
    let vol_ok = io::decode_volume(&io::encode_volume(&f)?)? == f;
    let cfg = ExperimentConfig::parse("n = 9\nnsr = 0.5, 1\n")?;
    let cfg_ok = ExperimentConfig::parse(&cfg.to_text())? == cfg;
    let scheme = tset_scheme(4, 14)?;
    let scheme_ok = io::parse_scheme(&io::format_scheme(&scheme))?.directions() == scheme.directions();
    Ok(Check {
        name: "file format round trips",
        passed: vol_ok && cfg_ok && scheme_ok,
        detail: format!("volume {vol_ok}, config {cfg_ok}, scheme {scheme_ok}"),
    })
}

type CheckFn = fn() -> Result<Check>;

/// Runs every check; a check that errors is reported as failed.
pub fn self_check() -> Vec<Check> {
    let fallible: [(&'static str, CheckFn); 5] = [
        ("projector adjoint identity", projector_adjoint),
        ("measurement operator adjoint identity", operator_adjoint),
        ("vandermonde tomography round trip", tomography_round_trip),
        ("noiseless phase retrieval correlation", phase_retrieval),
        ("file format round trips", formats),
    ];
    let mut out = vec![kernel_check()];
    for (name, run) in fallible {
        out.push(run().unwrap_or_else(|e| Check {
            name,
            passed: false,
            detail: e.to_string(),
        }));
    }
    out
}
