use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{slot, LatticeSpec, Object3D};
use crate::projector::{project, Projection2D};
use crate::tilt::{bfs_tree, dominant_family, epsilon_graph, is_epsilon_connected, TiltScheme};

use super::tomography::{solve_slices, stack_to_object};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnwrapOptions {
    /// Cap on the central-plane offset refinements.
    pub max_refinements: usize,
    /// Relative reprojection residual required for success.
    pub residual_tol: f64,
}

impl Default for UnwrapOptions {
    fn default() -> Self {
        Self {
            max_refinements: 50,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnwrapResult {
    /// Unwrapped projections in scheme order.
    pub projections: Vec<Projection2D>,
    pub object: Object3D,
    /// Directions unwrapped along the spanning tree, the rest against the reprojection.
    pub tree_members: Vec<usize>,
    pub refinements: usize,
    /// Relative residual between the reprojected object and the unwrapped data.
    pub residual: f64,
    pub converged: bool,
    /// Most common number of wrap periods removed from the reference projection.
    pub detected_offset: i64,
}

fn nearest_period(target: f64, value: f64, period: f64) -> f64 {
    value + period * ((target - value) / period).round()
}

/// Recovers unwrapped projections and the object from wrapped phase projections.
pub fn unwrap_tilt_series(wrapped: &[Projection2D], scheme: &TiltScheme, spec: &LatticeSpec) -> Result<UnwrapResult> {
    unwrap_tilt_series_with(wrapped, scheme, spec, &UnwrapOptions::default())
}

/// The tilt series is unwrapped in three steps.
///
/// 1. Projections of the most populated family are unwrapped pixelwise along
///    a breadth-first tree of the epsilon-graph. Afterwards they all share one
///    unknown integer offset field on the detector.
/// 2. That field acts like a plane at the central slice. An unconfined
///    reconstruction exposes it; the smoothness bound between the central
///    slice and its neighbours pins it to the nearest period, and it is
///    subtracted until it vanishes.
/// 3. The remaining directions are unwrapped against the reprojection.
pub fn unwrap_tilt_series_with(
    wrapped: &[Projection2D],
    scheme: &TiltScheme,
    spec: &LatticeSpec,
    opts: &UnwrapOptions,
) -> Result<UnwrapResult> {
    let (n, p) = (spec.n(), spec.p());
    if n < 3 {
        return Err(Error::InvalidArgument("unwrapping needs n >= 3".into()));
    }
    if wrapped.len() != scheme.len()
        || wrapped.iter().zip(scheme.directions()).any(|(w, d)| w.direction() != d || w.spec() != spec)
    {
        return Err(Error::ShapeMismatch {
            expected: format!("{} projections in scheme order", scheme.len()),
            got: format!("{} projections", wrapped.len()),
        });
    }
    if !is_epsilon_connected(scheme) {
        return Err(Error::NotConnected {
            epsilon: scheme.epsilon(),
        });
    }
    let period = spec.wrap_period();
    let (family, _) = dominant_family(scheme);
    let members = scheme.family_indices(family);

    // Step 1: spanning tree of the family subgraph.
    let adj = epsilon_graph(scheme);
    let local: HashMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let sub_adj: Vec<Vec<usize>> = members
        .iter()
        .map(|g| adj[*g].iter().filter_map(|h| local.get(h).copied()).collect())
        .collect();
    let (order, parent) = bfs_tree(&sub_adj, 0);
    if order.len() < n {
        return Err(Error::InsufficientDirections {
            needed: n,
            found: order.len(),
        });
    }
    let mut values: Vec<Vec<f64>> = wrapped.iter().map(|w| w.values().iter().map(|v| v.re).collect()).collect();
    for &l in &order {
        if let Some(pl) = parent[l] {
            let (child, par) = (members[l], members[pl]);
            let updated: Vec<f64> = values[child]
                .iter()
                .zip(&values[par])
                .map(|(&w, &u)| nearest_period(u, w, period))
                .collect();
            values[child] = updated;
        }
    }
    let tree_members: Vec<usize> = order.iter().map(|&l| members[l]).collect();

    let as_projection = |t: usize, vals: &[f64]| {
        Projection2D::from_storage(*spec, scheme.directions()[t], vals.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    };

    // Step 2: remove the shared offset field.
    let (up, dn) = (slot(1, n), slot(-1, n));
    let mut refinements = 0;
    let mut settled = false;
    while refinements < opts.max_refinements {
        let current = tree_members
            .iter()
            .map(|&t| as_projection(t, &values[t]))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Projection2D> = current.iter().collect();
        let stack = solve_slices(&refs, spec, false)?;
        let offsets: Vec<f64> = (0..p * p)
            .map(|k| {
                let lap = stack.slices[0][k].re - 0.5 * (stack.slices[up][k].re + stack.slices[dn][k].re);
                (lap / period).round()
            })
            .collect();
        if offsets.iter().all(|&m| m == 0.0) {
            settled = true;
            break;
        }
        for &t in &tree_members {
            values[t].iter_mut().zip(&offsets).for_each(|(v, m)| *v -= period * m);
        }
        refinements += 1;
    }

    let tree_projections = tree_members
        .iter()
        .map(|&t| as_projection(t, &values[t]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Projection2D> = tree_projections.iter().collect();
    let object = stack_to_object(&solve_slices(&refs, spec, true)?, spec).real_part();

    // Step 3: everything else follows the reprojection.
    let in_tree: Vec<bool> = (0..scheme.len()).map(|t| tree_members.contains(&t)).collect();
    let reprojections: Vec<Projection2D> = scheme.directions().par_iter().map(|d| project(&object, d)).collect();
    for t in 0..scheme.len() {
        if !in_tree[t] {
            let updated: Vec<f64> = values[t]
                .iter()
                .zip(reprojections[t].values())
                .map(|(&w, r)| nearest_period(r.re, w, period))
                .collect();
            values[t] = updated;
        }
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for (t, r) in reprojections.iter().enumerate() {
        for (u, v) in values[t].iter().zip(r.values()) {
            num += (u - v.re).powi(2) + v.im * v.im;
            den += u * u;
        }
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };

    let root = members[0];
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for (w, u) in wrapped[root].values().iter().zip(&values[root]) {
        *counts.entry(((w.re - u) / period).round() as i64).or_default() += 1;
    }
    let detected_offset = counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.abs().cmp(&a.0.abs())))
        .map(|(k, _)| k)
        .unwrap_or(0);

    let projections = (0..scheme.len())
        .map(|t| as_projection(t, &values[t]))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnwrapResult {
        projections,
        object,
        tree_members,
        refinements,
        residual,
        converged: settled && residual < opts.residual_tol,
        detected_offset,
    })
}

/// Wraps real projection values into `(-P/2, P/2]` with `P = 2 pi / kappa`.
pub fn wrap_projection(proj: &Projection2D) -> Projection2D {
    let period = proj.spec().wrap_period();
    proj.map(|v| {
        let mut w = v.re - period * (v.re / period).round();
        if w <= -period / 2.0 {
            w += period;
        }
        Complex64::new(w, 0.0)
    })
}
