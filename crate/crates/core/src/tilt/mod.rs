//! Tilt schemes: generators, the epsilon-adjacency graph, the diversity
//! check and Vandermonde solves.

mod diversity;
mod vandermonde;

pub use diversity::{diversity_check, diversity_check_family, dominant_family, DiversityReport, WorstPair};
pub use vandermonde::{vandermonde_lstsq, vandermonde_solve, vandermonde_solve_with, VandermondeSolution, DEFAULT_NODE_TOL};

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::projector::{angle_between, Direction, Family};

/// Default adjacency threshold `0.5 / n` radians.
pub fn default_epsilon(n: usize) -> f64 {
    0.5 / n as f64
}

/// Ordered list of distinct directions with an adjacency threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltScheme {
    directions: Vec<Direction>,
    epsilon: f64,
    seed: Option<u64>,
}

impl TiltScheme {
    pub fn new(directions: Vec<Direction>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        for (a, d) in directions.iter().enumerate() {
            if directions[..a].contains(d) {
                return Err(Error::InvalidArgument(format!("duplicate direction {d:?}")));
            }
        }
        Ok(Self {
            directions,
            epsilon,
            seed: None,
        })
    }

    /// Drops directions within `1e-12` rad of an earlier one.
    pub fn deduplicated(directions: Vec<Direction>, epsilon: f64) -> Result<Self> {
        let mut kept: Vec<Direction> = Vec::with_capacity(directions.len());
        for d in directions {
            if kept.iter().all(|k| k.angle_to(&d) > 1e-12) {
                kept.push(d);
            }
        }
        Self::new(kept, epsilon)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Indices of the directions belonging to `family`.
    pub fn family_indices(&self, family: Family) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.directions[i].family() == family)
            .collect()
    }
}

/// Where [`random_tilt_scheme`] draws its directions from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingRegion {
    /// Slopes `(alpha, beta)` i.i.d. uniform on `[lo, hi)^2` within one family.
    SlopeBox { family: Family, lo: f64, hi: f64 },
    /// Uniform on the spherical triangle spanned by the three positive axes.
    SphericalTriangle,
}

impl Default for SamplingRegion {
    fn default() -> Self {
        SamplingRegion::SlopeBox {
            family: Family::X,
            lo: 0.0,
            hi: 1.0,
        }
    }
}

/// Uniform draw on `[lo, hi)` restricted to the open interval `(-1, 1)`.
fn open_slope(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let s = rng.random_range(lo..hi);
        if s.abs() < 1.0 {
            return s;
        }
    }
}

/// `count` random directions from `region`, plus the anchors
/// `(0, a0, b0)` and `(0, 0, 1)` when `anchors` is set.
pub fn random_tilt_scheme(
    n: usize,
    region: SamplingRegion,
    count: usize,
    seed: u64,
    anchors: bool,
) -> Result<TiltScheme> {
    if count < n {
        return Err(Error::InvalidArgument(format!(
            "count = {count} is smaller than n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(count + 2);
    while dirs.len() < count {
        let d = match region {
            SamplingRegion::SlopeBox { family, lo, hi } => {
                if !(lo < hi && lo >= -1.0 && hi <= 1.0) {
                    return Err(Error::InvalidArgument(format!("bad slope box [{lo}, {hi})")));
                }
                let a = open_slope(&mut rng, lo, hi);
                let b = open_slope(&mut rng, lo, hi);
                Direction::new(family, a, b)?
            }
            SamplingRegion::SphericalTriangle => {
                // |gaussian| is uniform on the positive octant of the sphere
                let v: [f64; 3] = std::array::from_fn(|_| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal).abs()
                });
                match Direction::from_vector(v) {
                    Ok(d) => d,
                    Err(_) => continue,
                }
            }
        };
        if !dirs.contains(&d) {
            dirs.push(d);
        }
    }
    if anchors {
        let a0: f64 = rng.random_range(0.5..1.0);
        let b0: f64 = rng.random_range(0.0..a0);
        dirs.push(Direction::from_vector([0.0, a0, b0])?);
        dirs.push(Direction::z(0.0, 0.0)?);
    }
    Ok(TiltScheme::deduplicated(dirs, default_epsilon(n))?.with_seed(seed))
}

/// `3n` directions, `n` per family, slopes i.i.d. uniform on `(-1, 1)`.
pub fn tset_scheme(n: usize, seed: u64) -> Result<TiltScheme> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(3 * n);
    for family in Family::ALL {
        for _ in 0..n {
            let a = open_slope(&mut rng, -1.0, 1.0);
            let b = open_slope(&mut rng, -1.0, 1.0);
            dirs.push(Direction::new(family, a, b)?);
        }
    }
    Ok(TiltScheme::new(dirs, default_epsilon(n))?.with_seed(seed))
}

/// Tilt axis of the conical orbit through the three coordinate axes.
pub const CONICAL_AXIS: [f64; 3] = [
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
    0.577_350_269_189_625_8,
];

/// Tilt range of the conical orbit from `(1,0,0)` to `(0,0,1)`.
pub const CONICAL_RANGE: f64 = 4.0 * PI / 3.0;

/// `count` unit vectors equally spaced in tilt angle along the conical
/// orbit `(1,0,0) -> (0,1,0) -> (0,0,1)` about `(1,1,1)`.
pub fn conical_orbit(count: usize) -> Vec<[f64; 3]> {
    let a = CONICAL_AXIS;
    let v0 = [1.0, 0.0, 0.0];
    let a_dot = a[0] * v0[0] + a[1] * v0[1] + a[2] * v0[2];
    let cross = [
        a[1] * v0[2] - a[2] * v0[1],
        a[2] * v0[0] - a[0] * v0[2],
        a[0] * v0[1] - a[1] * v0[0],
    ];
    (0..count)
        .map(|k| {
            let phi = if count > 1 {
                CONICAL_RANGE * k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let (s, c) = phi.sin_cos();
            std::array::from_fn(|m| c * v0[m] + s * cross[m] + (1.0 - c) * a_dot * a[m])
        })
        .collect()
}

/// Length of the polyline through [`conical_orbit`]`(count)`.
pub fn conical_orbit_length(count: usize) -> f64 {
    conical_orbit(count)
        .windows(2)
        .map(|w| {
            let d: [f64; 3] = std::array::from_fn(|m| w[1][m] - w[0][m]);
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .sum()
}

/// Conical tilt series with cone half-angle `arccos(1/sqrt 3)` and range `4 pi / 3`.
pub fn conical_tilt_scheme(count: usize) -> Result<TiltScheme> {
    if count < 3 {
        return Err(Error::InvalidArgument(format!("count = {count} must be at least 3")));
    }
    let dirs = conical_orbit(count)
        .into_iter()
        .map(Direction::from_vector)
        .collect::<Result<Vec<_>>>()?;
    let eps = CONICAL_RANGE * CONICAL_AXIS_SINE / (count - 1) as f64 * 1.5;
    TiltScheme::deduplicated(dirs, eps)
}

/// Radius of the conical orbit on the unit sphere, `sqrt(2/3)`.
const CONICAL_AXIS_SINE: f64 = 0.816_496_580_927_726;

/// The broken dual-axis orbit
/// `{(1, l/q, a)} u {(l/q, 1, a)} u {(0, 1, l/q)} u {(0, l/q, 1)}`,
/// `l = 0..=q`, with duplicates removed.
pub fn dual_axis_scheme(q: usize, alpha: f64) -> Result<TiltScheme> {
    if q < 1 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in [0, 1)")));
    }
    let qf = q as f64;
    let mut vectors = Vec::with_capacity(4 * (q + 1));
    for l in 0..=q {
        vectors.push([1.0, l as f64 / qf, alpha]);
    }
    for l in 0..=q {
        vectors.push([l as f64 / qf, 1.0, alpha]);
    }
    for l in 0..=q {
        vectors.push([0.0, 1.0, l as f64 / qf]);
    }
    for l in 0..=q {
        vectors.push([0.0, l as f64 / qf, 1.0]);
    }
    let dirs = vectors
        .into_iter()
        .map(Direction::from_vector)
        .collect::<Result<Vec<_>>>()?;
    TiltScheme::deduplicated(dirs, 1.0 / qf)
}

/// Adjacency lists: `i ~ j` iff the angle between them is at most epsilon.
pub fn epsilon_graph(scheme: &TiltScheme) -> Vec<Vec<usize>> {
    let units: Vec<[f64; 3]> = scheme.directions().iter().map(|d| d.unit_vector()).collect();
    let eps = scheme.epsilon();
    let m = units.len();
    let mut adj = vec![Vec::new(); m];
    for a in 0..m {
        for b in a + 1..m {
            if angle_between(units[a], units[b]) <= eps {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

/// Breadth-first parents from `root`; unreachable nodes stay `None`.
/// Returns the visit order and the parent of each node.
pub fn bfs_tree(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut parent = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut order = Vec::with_capacity(adj.len());
    let mut queue = VecDeque::new();
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (order, parent)
}

pub fn is_epsilon_connected(scheme: &TiltScheme) -> bool {
    if scheme.is_empty() {
        return false;
    }
    let adj = epsilon_graph(scheme);
    bfs_tree(&adj, 0).0.len() == scheme.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_scheme_is_deterministic() {
        let a = random_tilt_scheme(5, SamplingRegion::default(), 40, 7, false).unwrap();
        let b = random_tilt_scheme(5, SamplingRegion::default(), 40, 7, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.directions().iter().all(|d| d.family() == Family::X
            && (0.0..1.0).contains(&d.alpha())
            && (0.0..1.0).contains(&d.beta())));
        assert!(random_tilt_scheme(5, SamplingRegion::default(), 4, 7, false).is_err());
    }

    #[test]
    fn random_scheme_anchors() {
        let s = random_tilt_scheme(7, SamplingRegion::default(), 20, 3, true).unwrap();
        let units: Vec<[f64; 3]> = s.directions().iter().map(|d| d.unit_vector()).collect();
        assert!(units.iter().any(|u| u[2] == 1.0 && u[0] == 0.0 && u[1] == 0.0));
        assert!(units.iter().any(|u| u[0] == 0.0 && u[1] != 0.0 && u[2] != 1.0));
    }

    #[test]
    fn tset_shape() {
        let s = tset_scheme(36, 1).unwrap();
        assert_eq!(s.len(), 108);
        for fam in Family::ALL {
            assert_eq!(s.family_indices(fam).len(), 36);
        }
        let t = tset_scheme(5, 2).unwrap();
        assert!(t.directions().iter().all(|d| d.alpha().abs() < 1.0 && d.beta().abs() < 1.0));
        assert_ne!(t, tset_scheme(5, 3).unwrap());
    }

    #[test]
    fn conical_geometry() {
        let orbit = conical_orbit(5);
        let close = |u: [f64; 3], v: [f64; 3]| (0..3).all(|m| (u[m] - v[m]).abs() < 1e-12);
        assert!(close(orbit[0], [1.0, 0.0, 0.0]));
        assert!(close(orbit[2], [0.0, 1.0, 0.0]));
        assert!(close(orbit[4], [0.0, 0.0, 1.0]));
        let cone = (1.0 / 3f64.sqrt()).acos();
        let scheme = conical_tilt_scheme(101).unwrap();
        for d in scheme.directions() {
            assert!((angle_between(d.unit_vector(), CONICAL_AXIS) - cone).abs() < 1e-9);
        }
        assert!(conical_tilt_scheme(2).is_err());
        assert!(is_epsilon_connected(&scheme));
    }

    #[test]
    fn dual_axis_contents() {
        let s = dual_axis_scheme(1, 0.0).unwrap();
        let has = |v: [f64; 3]| {
            let d = Direction::from_vector(v).unwrap();
            s.directions().iter().any(|e| e.angle_to(&d) < 1e-12)
        };
        for v in [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]] {
            assert!(has(v), "{v:?}");
        }
        assert_eq!(s.len(), 5);

        let q = 100;
        let s = dual_axis_scheme(q, 0.3).unwrap();
        assert_eq!(s.len(), 4 * (q + 1) - 3);
        let worst = s
            .directions()
            .windows(2)
            .take(q)
            .map(|w| w[0].angle_to(&w[1]))
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn graph_basics() {
        let one = TiltScheme::new(vec![Direction::z(0.0, 0.0).unwrap()], 0.1).unwrap();
        assert!(is_epsilon_connected(&one));
        let eps: f64 = 0.05;
        let two = TiltScheme::new(
            vec![
                Direction::z(0.0, 0.0).unwrap(),
                Direction::z((2.0 * eps).tan(), 0.0).unwrap(),
            ],
            eps,
        )
        .unwrap();
        assert!(!is_epsilon_connected(&two));
        assert!(TiltScheme::new(vec![], 0.0).is_err());
    }

    #[test]
    fn graph_symmetric_and_permutation_invariant() {
        let s = random_tilt_scheme(5, SamplingRegion::SphericalTriangle, 300, 4, false)
            .unwrap()
            .with_epsilon(0.3)
            .unwrap();
        let adj = epsilon_graph(&s);
        for (a, nbrs) in adj.iter().enumerate() {
            for &b in nbrs {
                assert!(adj[b].contains(&a));
            }
        }
        let mut rev = s.directions().to_vec();
        rev.reverse();
        let r = TiltScheme::new(rev, 0.3).unwrap();
        assert_eq!(is_epsilon_connected(&s), is_epsilon_connected(&r));
    }

    #[test]
    fn dense_triangle_is_connected() {
        let eps = 0.3f64;
        let count = (50.0 / (eps * eps)).ceil() as usize;
        for seed in 0..10 {
            let s = random_tilt_scheme(5, SamplingRegion::SphericalTriangle, count, seed, false)
                .unwrap()
                .with_epsilon(eps)
                .unwrap();
            assert!(is_epsilon_connected(&s), "seed {seed}");
        }
    }
}
