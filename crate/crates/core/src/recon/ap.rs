use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::Object3D;

use super::{correlation, MeasurementOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport {
    pub iterations: usize,
    /// `||b - |A u_k|||` for the initial iterate and after each iteration.
    pub residual_history: Vec<f64>,
    /// Correlation with the ground truth, aligned with `residual_history`.
    pub correlation_history: Vec<f64>,
    pub final_object: Object3D,
    /// False if any inner CG solve stopped at its iteration cap.
    pub cg_converged: bool,
    pub cg_iterations: usize,
}

impl ReconReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApOptions {
    pub max_iters: usize,
    pub init_seed: u64,
    /// Stop once `||b - |A u||| <= tol ||b||`.
    pub tol: f64,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            init_seed: 0,
            tol: 1e-12,
        }
    }
}

/// Magnitude projection `b * sgn(h)` with `sgn(0) = 1`.
pub fn magnitude_projection(h: &[Complex64], b: &[f64]) -> Vec<Complex64> {
    h.iter()
        .zip(b)
        .map(|(v, &m)| {
            let r = v.norm();
            if r == 0.0 {
                Complex64::new(m, 0.0)
            } else {
                v * (m / r)
            }
        })
        .collect()
}

fn residual(h: &[Complex64], b: &[f64]) -> f64 {
    h.iter().zip(b).map(|(v, m)| (m - v.norm()).powi(2)).sum::<f64>().sqrt()
}

/// Alternating projections `h <- P1 P2 h` from a white-noise object.
pub fn ap_reconstruct(
    op: &MeasurementOperator,
    b: &[f64],
    init_seed: u64,
    max_iters: usize,
    ground_truth: Option<&Object3D>,
) -> Result<ReconReport> {
    let opts = ApOptions {
        max_iters,
        init_seed,
        ..ApOptions::default()
    };
    ap_reconstruct_with(op, b, &opts, ground_truth)
}

pub fn ap_reconstruct_with(
    op: &MeasurementOperator,
    b: &[f64],
    opts: &ApOptions,
    ground_truth: Option<&Object3D>,
) -> Result<ReconReport> {
    if b.len() != op.data_len() {
        return Err(Error::ShapeMismatch {
            expected: op.data_len().to_string(),
            got: b.len().to_string(),
        });
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("magnitudes must be nonnegative".into()));
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let real = op.flags().real_constraint;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.init_seed);
    let mut f = Object3D::from_fn(*op.spec(), |_, _, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if real {
            Complex64::new(re, 0.0)
        } else {
            Complex64::new(re, im) / std::f64::consts::SQRT_2
        }
    });
    let mut h = op.forward(&f)?;
    let score = |f: &Object3D| ground_truth.map(|g| correlation(f, g)).transpose();

    let mut residual_history = vec![residual(&h, b)];
    let mut correlation_history: Vec<f64> = score(&f)?.into_iter().collect();
    let mut cg_converged = true;
    let mut cg_iterations = 0;
    let mut iterations = 0;
    while iterations < opts.max_iters && residual_history[iterations] > opts.tol * b_norm {
        let target = magnitude_projection(&h, b);
        let (next, next_f, info) = op.range_projection(&target, Some(&f))?;
        cg_converged &= info.converged;
        cg_iterations += info.iterations;
        h = next;
        f = next_f;
        iterations += 1;
        residual_history.push(residual(&h, b));
        if let Some(r) = score(&f)? {
            correlation_history.push(r);
        }
    }
    Ok(ReconReport {
        iterations,
        residual_history,
        correlation_history,
        final_object: f,
        cg_converged,
        cg_iterations,
    })
}
