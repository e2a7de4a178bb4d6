//! Random phase masks, coded diffraction patterns, trivial ambiguities,
//! Poisson noise and the noise-to-signal ratio.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::lattice::{centered, slot, LatticeSpec};
use crate::projector::{Direction, Projection2D};

/// Unit-modulus mask `exp(i phi)` on `Z_p^2`, storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    spec: LatticeSpec,
    phases: Vec<f64>,
}

impl PhaseMask {
    pub fn from_phases(spec: LatticeSpec, phases: Vec<f64>) -> Result<Self> {
        let p = spec.p();
        if phases.len() != p * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} phases", p * p),
                got: phases.len().to_string(),
            });
        }
        Ok(Self { spec, phases })
    }

    /// The all-ones mask, i.e. no coding.
    pub fn uniform(spec: LatticeSpec) -> Self {
        let p = spec.p();
        Self {
            spec,
            phases: vec![0.0; p * p],
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&f| Complex64::from_polar(1.0, f)).collect()
    }
}

/// Phases i.i.d. uniform on `[0, 2 pi)`.
pub fn random_phase_mask(spec: LatticeSpec, seed: u64) -> PhaseMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.p();
    let phases = (0..p * p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    PhaseMask { spec, phases }
}

/// Nonnegative intensities on `Z_p^2`, or on `Z_{2p-1}^2` when oversampled.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionPattern {
    spec: LatticeSpec,
    oversampled: bool,
    direction: Option<Direction>,
    intensities: Vec<f64>,
}

impl DiffractionPattern {
    pub fn new(
        spec: LatticeSpec,
        oversampled: bool,
        direction: Option<Direction>,
        intensities: Vec<f64>,
    ) -> Result<Self> {
        let g = grid_len(&spec, oversampled);
        if intensities.len() != g * g {
            return Err(Error::ShapeMismatch {
                expected: format!("{} intensities", g * g),
                got: intensities.len().to_string(),
            });
        }
        if let Some(bad) = intensities.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative or NaN intensity {bad}")));
        }
        Ok(Self {
            spec,
            oversampled,
            direction,
            intensities,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn oversampled(&self) -> bool {
        self.oversampled
    }

    pub fn direction(&self) -> Option<&Direction> {
        self.direction.as_ref()
    }

    /// Side length of the sampling grid.
    pub fn grid_len(&self) -> usize {
        grid_len(&self.spec, self.oversampled)
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    /// Elementwise square root, the Fourier magnitudes.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.intensities.iter().map(|v| v.sqrt()).collect()
    }

    /// Intensities multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            intensities: self.intensities.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }
}

fn grid_len(spec: &LatticeSpec, oversampled: bool) -> usize {
    if oversampled {
        2 * spec.p() - 1
    } else {
        spec.p()
    }
}

/// Embeds a `p x p` storage-order image into an `len x len` storage-order grid.
pub(crate) fn pad(values: &[Complex64], p: usize, len: usize) -> Vec<Complex64> {
    if len == p {
        return values.to_vec();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); len * len];
    for s1 in 0..p {
        let r = slot(centered(s1, p), len);
        for s2 in 0..p {
            out[r * len + slot(centered(s2, p), len)] = values[s1 * p + s2];
        }
    }
    out
}

/// Inverse of [`pad`]: keeps the `Z_p^2` window of a `len x len` grid.
pub(crate) fn crop(values: &[Complex64], p: usize, len: usize) -> Vec<Complex64> {
    if len == p {
        return values.to_vec();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); p * p];
    for s1 in 0..p {
        let r = slot(centered(s1, p), len);
        for s2 in 0..p {
            out[s1 * p + s2] = values[r * len + slot(centered(s2, p), len)];
        }
    }
    out
}

/// `DFT(pad(mask * image))`, unnormalized.
pub fn coded_spectrum(
    image: &[Complex64],
    spec: &LatticeSpec,
    mask: Option<&PhaseMask>,
    oversampled: bool,
) -> Result<Vec<Complex64>> {
    let p = spec.p();
    if image.len() != p * p {
        return Err(Error::ShapeMismatch {
            expected: format!("{} pixels", p * p),
            got: image.len().to_string(),
        });
    }
    let masked: Vec<Complex64> = match mask {
        Some(m) => {
            if m.spec().p() != p {
                return Err(Error::LatticeMismatch);
            }
            image
                .iter()
                .zip(m.phases())
                .map(|(v, &f)| v * Complex64::from_polar(1.0, f))
                .collect()
        }
        None => image.to_vec(),
    };
    let g = grid_len(spec, oversampled);
    let mut buf = pad(&masked, p, g);
    fft2(g).forward(&mut buf);
    Ok(buf)
}

/// `|DFT(mask * image)|^2` of a raw storage-order image.
pub fn diffraction_pattern_from(
    image: &[Complex64],
    spec: &LatticeSpec,
    mask: Option<&PhaseMask>,
    oversampled: bool,
) -> Result<DiffractionPattern> {
    let spectrum = coded_spectrum(image, spec, mask, oversampled)?;
    Ok(DiffractionPattern {
        spec: *spec,
        oversampled,
        direction: None,
        intensities: spectrum.iter().map(|c| c.norm_sqr()).collect(),
    })
}

/// Coded (or, with `mask = None`, uncoded) diffraction pattern of an image.
pub fn diffraction_pattern(
    image: &Projection2D,
    mask: Option<&PhaseMask>,
    oversampled: bool,
) -> Result<DiffractionPattern> {
    let mut pat = diffraction_pattern_from(image.values(), image.spec(), mask, oversampled)?;
    pat.direction = Some(*image.direction());
    Ok(pat)
}

/// Cyclic autocorrelation recovered from an oversampled pattern, on `Z_{2p-1}^2`.
pub fn autocorrelation(pattern: &DiffractionPattern) -> Vec<Complex64> {
    let g = pattern.grid_len();
    let mut buf: Vec<Complex64> = pattern.intensities.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(g).inverse_normalized(&mut buf);
    buf
}

/// Trivial transformations that leave uncoded patterns unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbiguityKind {
    /// `x(n) -> x(n + m)` cyclically.
    Translate(i64, i64),
    /// `x(n) -> conj(x(m - n))`.
    ConjugateFlip(i64, i64),
    /// `x(n) -> exp(i theta) x(n)`.
    GlobalPhase(f64),
}

/// Applies an ambiguity transformation to a storage-order image on `Z_p^2`.
pub fn ambiguity_variant(image: &[Complex64], p: usize, kind: AmbiguityKind) -> Vec<Complex64> {
    let at = |c1: i64, c2: i64| image[slot(c1, p) * p + slot(c2, p)];
    let mut out = vec![Complex64::new(0.0, 0.0); p * p];
    for s1 in 0..p {
        let c1 = centered(s1, p);
        for s2 in 0..p {
            let c2 = centered(s2, p);
            out[s1 * p + s2] = match kind {
                AmbiguityKind::Translate(m1, m2) => at(c1 + m1, c2 + m2),
                AmbiguityKind::ConjugateFlip(m1, m2) => at(m1 - c1, m2 - c2).conj(),
                AmbiguityKind::GlobalPhase(theta) => image[s1 * p + s2] * Complex64::from_polar(1.0, theta),
            };
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    s: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(s: f64, seed: u64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise scale s = {s} must be positive")));
        }
        Ok(Self { s, seed })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One Poisson draw with the given mean.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if !(mean > 0.0) {
        return 0.0;
    }
    if mean < 10.0 {
        let limit = (-mean).exp();
        let mut k = 0.0;
        let mut prod: f64 = rng.random();
        while prod > limit {
            k += 1.0;
            prod *= rng.random::<f64>();
        }
        k
    } else if mean < 1e6 {
        Poisson::new(mean).expect("positive finite mean").sample(rng)
    } else {
        let draw = Normal::new(mean, mean.sqrt()).expect("finite mean").sample(rng);
        draw.round().max(0.0)
    }
}

/// Poisson counts with mean `s * intensity`, drawn from stream 0 of the seed.
pub fn poissonize(pattern: &DiffractionPattern, noise: &NoiseSpec) -> DiffractionPattern {
    poissonize_stream(pattern, noise, 0)
}

/// As [`poissonize`], drawing from the given RNG stream so that patterns
/// of a stack can be noised independently and in parallel.
pub fn poissonize_stream(pattern: &DiffractionPattern, noise: &NoiseSpec, stream: u64) -> DiffractionPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(stream);
    let intensities = pattern
        .intensities
        .iter()
        .map(|&v| sample_poisson(&mut rng, noise.s * v))
        .collect();
    DiffractionPattern {
        intensities,
        ..pattern.clone()
    }
}

fn norms(patterns: &[DiffractionPattern]) -> (f64, f64) {
    let mut l1_b = 0.0;
    let mut l1_b2 = 0.0;
    for pat in patterns {
        for &v in &pat.intensities {
            l1_b += v.sqrt();
            l1_b2 += v;
        }
    }
    (l1_b, l1_b2)
}

/// `||b||_1 / (sqrt(s) ||b^2||_1)` over all patterns of a stack.
pub fn nsr(patterns: &[DiffractionPattern], s: f64) -> Result<f64> {
    let (l1_b, l1_b2) = norms(patterns);
    if l1_b2 == 0.0 {
        return Err(Error::InvalidArgument("pattern stack is identically zero".into()));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("noise scale s = {s} must be positive")));
    }
    Ok(l1_b / (s.sqrt() * l1_b2))
}

/// Scale `s` at which the stack has the requested NSR.
pub fn solve_s_for_nsr(patterns: &[DiffractionPattern], target_nsr: f64) -> Result<f64> {
    if !(target_nsr > 0.0 && target_nsr.is_finite()) {
        return Err(Error::InvalidArgument(format!("target NSR {target_nsr} must be positive")));
    }
    let (l1_b, l1_b2) = norms(patterns);
    if l1_b2 == 0.0 {
        return Err(Error::InvalidArgument("pattern stack is identically zero".into()));
    }
    Ok((l1_b / (target_nsr * l1_b2)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p: usize) -> LatticeSpec {
        LatticeSpec::new(n, p, PI).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); p * p];
        for s1 in 0..p {
            for s2 in 0..p {
                if crate::lattice::contains(centered(s1, p), n) && crate::lattice::contains(centered(s2, p), n) {
                    v[s1 * p + s2] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
        }
        v
    }

    fn rel_dist(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn mask_is_unit_modulus_and_reproducible() {
        let s = spec(36, 71);
        let m = random_phase_mask(s, 5);
        assert_eq!(m, random_phase_mask(s, 5));
        assert!(m.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        assert!(m.phases().iter().all(|&f| (0.0..2.0 * PI).contains(&f)));
        let mean: Complex64 = m.values().iter().sum::<Complex64>() / (71.0 * 71.0);
        assert!(mean.norm() < 0.05);
    }

    #[test]
    fn delta_gives_flat_pattern() {
        let s = spec(5, 11);
        let mut img = vec![Complex64::new(0.0, 0.0); 121];
        img[0] = Complex64::new(1.0, 0.0);
        let m = random_phase_mask(s, 1);
        for over in [false, true] {
            let pat = diffraction_pattern_from(&img, &s, Some(&m), over).unwrap();
            assert!(pat.intensities().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn parseval() {
        let s = spec(5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(&mut rng, 5, 11);
        let energy: f64 = img.iter().map(|v| v.norm_sqr()).sum();
        let m = random_phase_mask(s, 3);
        for over in [false, true] {
            let pat = diffraction_pattern_from(&img, &s, Some(&m), over).unwrap();
            let g = pat.grid_len() as f64;
            let total: f64 = pat.intensities().iter().sum::<f64>() / (g * g);
            assert!((total - energy).abs() < 1e-10 * energy);
        }
    }

    #[test]
    fn oversampled_pattern_gives_autocorrelation() {
        let s = spec(5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = random_image(&mut rng, 5, 11);
        let m = random_phase_mask(s, 5);
        let pat = diffraction_pattern_from(&img, &s, Some(&m), true).unwrap();
        let ac = autocorrelation(&pat);
        let x: Vec<Complex64> = img.iter().zip(m.values()).map(|(a, b)| a * b).collect();
        let at = |c1: i64, c2: i64| {
            if c1.abs() > 5 || c2.abs() > 5 {
                Complex64::new(0.0, 0.0)
            } else {
                x[slot(c1, 11) * 11 + slot(c2, 11)]
            }
        };
        let g = 21;
        let scale: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        for d1 in -10..=10i64 {
            for d2 in -10..=10i64 {
                let mut acc = Complex64::new(0.0, 0.0);
                for c1 in -5..=5 {
                    for c2 in -5..=5 {
                        acc += at(c1 + d1, c2 + d2) * at(c1, c2).conj();
                    }
                }
                let got = ac[slot(d1, g) * g + slot(d2, g)];
                assert!((got - acc).norm() < 1e-10 * scale, "{d1} {d2}");
            }
        }
    }

    #[test]
    fn uncoded_pattern_ignores_trivial_ambiguities() {
        let s = spec(7, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 7, 13);
        let base = diffraction_pattern_from(&img, &s, None, false).unwrap();
        for kind in [
            AmbiguityKind::Translate(2, -3),
            AmbiguityKind::ConjugateFlip(1, 4),
            AmbiguityKind::GlobalPhase(0.7),
        ] {
            let v = ambiguity_variant(&img, 13, kind);
            let pat = diffraction_pattern_from(&v, &s, None, false).unwrap();
            assert!(rel_dist(pat.intensities(), base.intensities()) < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn coded_pattern_sees_translation() {
        let s = spec(7, 13);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let img = random_image(&mut rng, 7, 13);
            let m = random_phase_mask(s, seed);
            let base = diffraction_pattern_from(&img, &s, Some(&m), false).unwrap();
            for kind in [AmbiguityKind::Translate(1, 0), AmbiguityKind::ConjugateFlip(0, 0)] {
                let v = ambiguity_variant(&img, 13, kind);
                let pat = diffraction_pattern_from(&v, &s, Some(&m), false).unwrap();
                assert!(rel_dist(pat.intensities(), base.intensities()) > 1e-3);
            }
            let g = ambiguity_variant(&img, 13, AmbiguityKind::GlobalPhase(1.3));
            let pat = diffraction_pattern_from(&g, &s, Some(&m), false).unwrap();
            assert!(rel_dist(pat.intensities(), base.intensities()) < 1e-12);
        }
    }

    #[test]
    fn translate_and_flip_definitions() {
        let p = 5;
        let img: Vec<Complex64> = (0..25).map(|k| Complex64::new(k as f64, -(k as f64))).collect();
        let t = ambiguity_variant(&img, p, AmbiguityKind::Translate(1, 2));
        assert_eq!(t[slot(0, p) * p + slot(0, p)], img[slot(1, p) * p + slot(2, p)]);
        assert_eq!(t[slot(2, p) * p + slot(1, p)], img[slot(-2, p) * p + slot(-2, p)]);
        let f = ambiguity_variant(&img, p, AmbiguityKind::ConjugateFlip(1, 0));
        assert_eq!(f[slot(2, p) * p + slot(-1, p)], img[slot(-1, p) * p + slot(1, p)].conj());
    }

    fn flat(n_pix: usize, s: LatticeSpec) -> DiffractionPattern {
        let g = (n_pix as f64).sqrt() as usize;
        assert_eq!(g, s.p());
        DiffractionPattern::new(s, false, None, vec![1.0; n_pix]).unwrap()
    }

    #[test]
    fn nsr_values() {
        let pat = flat(49, spec(3, 7));
        let one = std::slice::from_ref(&pat);
        assert!((nsr(one, 4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((nsr(one, 1.0).unwrap() - 2.0 * nsr(one, 4.0).unwrap()).abs() < 1e-15);
        assert!((solve_s_for_nsr(one, 0.5).unwrap() - 4.0).abs() < 1e-12);
        let s1 = solve_s_for_nsr(one, 1.0).unwrap();
        assert!((s1 - 1.0).abs() < 1e-12);
        let zero = DiffractionPattern::new(spec(3, 7), false, None, vec![0.0; 49]).unwrap();
        assert!(solve_s_for_nsr(std::slice::from_ref(&zero), 0.5).is_err());
        assert!(nsr(std::slice::from_ref(&zero), 1.0).is_err());
    }

    #[test]
    fn nsr_round_trip() {
        let s = spec(5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = random_image(&mut rng, 5, 11);
        let pats = vec![diffraction_pattern_from(&img, &s, Some(&random_phase_mask(s, 1)), false).unwrap()];
        for target in [0.01, 0.1, 0.37, 2.0] {
            let sv = solve_s_for_nsr(&pats, target).unwrap();
            assert!((nsr(&pats, sv).unwrap() - target).abs() < 1e-12 * target);
        }
        let a = solve_s_for_nsr(&pats, 0.5).unwrap();
        let b = solve_s_for_nsr(&pats, 1.0).unwrap();
        assert!((b - a / 4.0).abs() < 1e-12 * a);
    }

    #[test]
    fn nsr_matches_monte_carlo() {
        let s = spec(3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let img = random_image(&mut rng, 3, 7);
        let pat = diffraction_pattern_from(&img, &s, Some(&random_phase_mask(s, 2)), false).unwrap();
        let sv = 3.0;
        let draws = 1000;
        let m = pat.intensities().len();
        let mut sum = vec![0.0; m];
        let mut sum_sq = vec![0.0; m];
        for k in 0..draws {
            let noisy = poissonize_stream(&pat, &NoiseSpec::new(sv, 77).unwrap(), k);
            for (i, &c) in noisy.intensities().iter().enumerate() {
                let y = c / sv;
                sum[i] += y;
                sum_sq[i] += y * y;
            }
        }
        let n = draws as f64;
        let sd_l1: f64 = (0..m)
            .map(|i| (sum_sq[i] / n - (sum[i] / n).powi(2)).max(0.0).sqrt())
            .sum();
        let mean_l1: f64 = sum.iter().map(|v| v / n).sum();
        let empirical = sd_l1 / mean_l1;
        let formula = nsr(std::slice::from_ref(&pat), sv).unwrap();
        assert!((empirical / formula - 1.0).abs() < 0.05, "{empirical} vs {formula}");
    }

    #[test]
    fn poisson_concentrates_and_respects_zero() {
        let s = spec(3, 7);
        let mut vals = vec![0.0; 49];
        for (i, v) in vals.iter_mut().enumerate().skip(1) {
            *v = 0.5 + i as f64 / 10.0;
        }
        let pat = DiffractionPattern::new(s, false, None, vals.clone()).unwrap();
        let big = 1e8;
        let noisy = poissonize(&pat, &NoiseSpec::new(big, 3).unwrap());
        assert_eq!(noisy.intensities()[0], 0.0);
        for (c, b) in noisy.intensities().iter().zip(&vals).skip(1) {
            assert!((c / big - b).abs() / b < 1e-3);
        }
        assert!(noisy.intensities().iter().all(|c| *c >= 0.0 && c.fract() == 0.0));
        assert_eq!(noisy, poissonize(&pat, &NoiseSpec::new(big, 3).unwrap()));
    }

    #[test]
    fn poisson_variance_matches_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mean in [0.7, 4.0, 25.0, 3000.0, 2e6] {
            let draws: Vec<f64> = (0..10_000).map(|_| sample_poisson(&mut rng, mean)).collect();
            let m = draws.iter().sum::<f64>() / 1e4;
            let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (1e4 - 1.0);
            assert!((v / mean - 1.0).abs() < 0.05, "mean {mean}: var {v}");
            assert!((m / mean - 1.0).abs() < 0.05);
        }
        assert!(NoiseSpec::new(0.0, 1).is_err());
    }
}
