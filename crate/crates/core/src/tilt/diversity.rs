use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{centered, LatticeSpec};
use crate::projector::{Direction, Family};

use super::TiltScheme;

/// The frequency and the two nodes bounding the limiting gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstPair {
    pub frequency: (i64, i64),
    pub nodes: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub family: Family,
    pub satisfied: bool,
    pub worst_pair: Option<WorstPair>,
    /// Chord length of the limiting node gap, minimized over frequencies.
    pub min_node_gap: f64,
    pub tol: f64,
}

/// The family with the most directions; ties go to the lower axis.
pub fn dominant_family(scheme: &TiltScheme) -> (Family, usize) {
    Family::ALL
        .iter()
        .map(|&f| (f, scheme.family_indices(f).len()))
        .fold((Family::X, 0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Checks the diversity condition on the most populated family of `scheme`.
pub fn diversity_check(scheme: &TiltScheme, spec: &LatticeSpec, tol: f64) -> Result<DiversityReport> {
    let (family, count) = dominant_family(scheme);
    if count < spec.n() {
        return Err(Error::InsufficientDirections {
            needed: spec.n(),
            found: count,
        });
    }
    let dirs: Vec<Direction> = scheme
        .family_indices(family)
        .into_iter()
        .map(|i| scheme.directions()[i])
        .collect();
    diversity_check_family(&dirs, spec, tol)
}

/// Diversity check on same-family directions.
///
/// For every nonzero `(xi, eta)` the nodes `exp(-i 2 pi (alpha xi + beta eta) / p)`
/// must take at least `n` distinct values. With exactly `n` nodes this is
/// pairwise distinctness; the reported gap is then the minimum pairwise chord.
/// With more nodes it is the `n`-th largest circular gap between sorted nodes.
pub fn diversity_check_family(dirs: &[Direction], spec: &LatticeSpec, tol: f64) -> Result<DiversityReport> {
    let n = spec.n();
    let p = spec.p();
    if dirs.len() < n {
        return Err(Error::InsufficientDirections {
            needed: n,
            found: dirs.len(),
        });
    }
    let family = dirs.first().map(|d| d.family()).unwrap_or(Family::X);
    if dirs.iter().any(|d| d.family() != family) {
        return Err(Error::InvalidArgument("directions span several families".into()));
    }
    if n == 1 {
        return Ok(DiversityReport {
            family,
            satisfied: true,
            worst_pair: None,
            min_node_gap: f64::INFINITY,
            tol,
        });
    }

    let mut best_gap = f64::INFINITY;
    let mut worst = None;
    let mut angles: Vec<(f64, usize)> = Vec::with_capacity(dirs.len());
    let mut gaps: Vec<(f64, usize, usize)> = Vec::with_capacity(dirs.len());
    for s1 in 0..p {
        for s2 in 0..p {
            if s1 == 0 && s2 == 0 {
                continue;
            }
            let (xi, eta) = (centered(s1, p), centered(s2, p));
            angles.clear();
            angles.extend(dirs.iter().enumerate().map(|(l, d)| {
                let u = d.alpha() * xi as f64 + d.beta() * eta as f64;
                ((-2.0 * PI * u / p as f64).rem_euclid(2.0 * PI), l)
            }));
            angles.sort_by(|a, b| a.0.total_cmp(&b.0));
            gaps.clear();
            for w in 0..angles.len() {
                let (a, ia) = angles[w];
                let (b, ib) = angles[(w + 1) % angles.len()];
                let mut g = b - a;
                if w + 1 == angles.len() {
                    g += 2.0 * PI;
                }
                gaps.push((g, ia, ib));
            }
            gaps.sort_by(|a, b| b.0.total_cmp(&a.0));
            let (g, ia, ib) = gaps[n - 1];
            let chord = 2.0 * (g.min(2.0 * PI - g) / 2.0).sin().abs();
            if chord < best_gap {
                best_gap = chord;
                worst = Some(WorstPair {
                    frequency: (xi, eta),
                    nodes: (ia.min(ib), ia.max(ib)),
                });
            }
        }
    }
    Ok(DiversityReport {
        family,
        satisfied: best_gap > tol,
        worst_pair: worst,
        min_node_gap: best_gap,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilt::{random_tilt_scheme, SamplingRegion};

    fn brute_min_pairwise(dirs: &[Direction], p: usize) -> f64 {
        let mut best = f64::INFINITY;
        for xi in -(p as i64 / 2)..=(p as i64 / 2) {
            for eta in -(p as i64 / 2)..=(p as i64 / 2) {
                if xi == 0 && eta == 0 {
                    continue;
                }
                for a in 0..dirs.len() {
                    for b in a + 1..dirs.len() {
                        let ua = dirs[a].alpha() * xi as f64 + dirs[a].beta() * eta as f64;
                        let ub = dirs[b].alpha() * xi as f64 + dirs[b].beta() * eta as f64;
                        let za = num_complex::Complex64::from_polar(1.0, -2.0 * PI * ua / p as f64);
                        let zb = num_complex::Complex64::from_polar(1.0, -2.0 * PI * ub / p as f64);
                        best = best.min((za - zb).norm());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn matches_pairwise_oracle_for_n_nodes() {
        let spec = LatticeSpec::new(5, 11, PI).unwrap();
        let s = random_tilt_scheme(5, SamplingRegion::default(), 5, 9, false).unwrap();
        let r = diversity_check(&s, &spec, 1e-9).unwrap();
        let oracle = brute_min_pairwise(s.directions(), 11);
        assert!((r.min_node_gap - oracle).abs() < 1e-12, "{} vs {oracle}", r.min_node_gap);
        assert!(r.satisfied);
    }

    #[test]
    fn crafted_collision_is_detected() {
        let spec = LatticeSpec::new(3, 13, PI).unwrap();
        // slope difference (1.3, 1.3) wraps by one period at (5, 5) and cancels at (1, -1)
        let wrap = vec![
            Direction::x(-0.65, -0.65).unwrap(),
            Direction::x(0.65, 0.65).unwrap(),
            Direction::x(0.1, 0.37).unwrap(),
        ];
        let r = diversity_check_family(&wrap, &spec, 1e-9).unwrap();
        assert!(!r.satisfied);
        assert!(r.min_node_gap < 1e-12);
        assert_eq!(r.worst_pair.unwrap().nodes, (0, 1));
        let f = r.worst_pair.unwrap().frequency;
        assert_eq!((f.0 + f.1) % 10, 0);

        // slope difference (0.2, 0.2) cancels at (xi, eta) = (1, -1)
        let cancel = vec![
            Direction::x(0.0, 0.0).unwrap(),
            Direction::x(0.2, 0.2).unwrap(),
            Direction::x(0.51, 0.13).unwrap(),
        ];
        let r = diversity_check_family(&cancel, &spec, 1e-9).unwrap();
        assert!(!r.satisfied);
        let f = r.worst_pair.unwrap().frequency;
        assert_eq!(f.0, -f.1);
    }

    #[test]
    fn random_slopes_are_diverse() {
        let spec = LatticeSpec::new(7, 13, PI).unwrap();
        for seed in 0..10 {
            let s = random_tilt_scheme(7, SamplingRegion::default(), 7 * 20, seed, false).unwrap();
            assert!(diversity_check(&s, &spec, 1e-9).unwrap().satisfied, "seed {seed}");
            let t = random_tilt_scheme(7, SamplingRegion::default(), 7, seed, false).unwrap();
            assert!(diversity_check(&t, &spec, 1e-9).unwrap().satisfied, "seed {seed}");
        }
    }

    #[test]
    fn n_one_is_vacuous() {
        let spec = LatticeSpec::new(1, 3, PI).unwrap();
        let dirs = vec![Direction::x(0.0, 0.0).unwrap()];
        let r = diversity_check_family(&dirs, &spec, 1e-9).unwrap();
        assert!(r.satisfied);
        assert!(r.worst_pair.is_none());
    }

    #[test]
    fn too_few_directions_rejected() {
        let spec = LatticeSpec::new(5, 11, PI).unwrap();
        let s = random_tilt_scheme(4, SamplingRegion::default(), 4, 1, false).unwrap();
        assert!(matches!(
            diversity_check(&s, &spec, 1e-9),
            Err(Error::InsufficientDirections { needed: 5, found: 4 })
        ));
    }
}
