//! End-to-end runs driven by an [`ExperimentConfig`].
//!
//! All random streams derive from the single `seed` key, so a run is
//! reproducible bit for bit.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, PhantomSource, SchemeSource, Solver};
use crate::error::Error;
use crate::io;
use crate::lattice::{LatticeSpec, Object3D};
use crate::measurement::{poissonize_stream, random_phase_mask, solve_s_for_nsr, DiffractionPattern, NoiseSpec, PhaseMask};
use crate::phantom;
use crate::projector::{project, Projection2D};
use crate::recon::{
    ap_reconstruct_with, correlation, unwrap_tilt_series_with, vandermonde_tomography_report, wrap_projection,
    ApOptions, MeasurementOperator, OperatorFlags, ReconReport, UnwrapOptions,
};
use crate::tilt::{
    conical_tilt_scheme, diversity_check, dual_axis_scheme, random_tilt_scheme, tset_scheme, SamplingRegion,
    TiltScheme,
};

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Independent seeds for each random stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub phantom: u64,
    pub scheme: u64,
    pub mask: u64,
    pub noise: u64,
    pub init: u64,
}

impl Seeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            phantom: rng.next_u64(),
            scheme: rng.next_u64(),
            mask: rng.next_u64(),
            noise: rng.next_u64(),
            init: rng.next_u64(),
        }
    }
}

pub fn make_phantom(cfg: &ExperimentConfig) -> crate::Result<Object3D> {
    let spec = cfg.spec()?;
    let seeds = Seeds::derive(cfg.seed);
    match &cfg.phantom {
        PhantomSource::Builtin => phantom::build_phantom(&phantom::builtin_raster(cfg.n), spec),
        PhantomSource::Random => Ok(phantom::random_phantom(spec, seeds.phantom)),
        PhantomSource::Blobs => Ok(phantom::blob_phantom(spec, seeds.phantom, cfg.phantom_peak)),
        PhantomSource::Pgm(path) => phantom::build_phantom(&io::decode_pgm(&io::read_file(path)?)?, spec),
    }
}

pub fn make_scheme(cfg: &ExperimentConfig) -> crate::Result<TiltScheme> {
    let n = cfg.n;
    let seed = Seeds::derive(cfg.seed).scheme;
    let count = if cfg.scheme_count == 0 { 3 * n } else { cfg.scheme_count };
    let scheme = match &cfg.scheme {
        SchemeSource::Tset => tset_scheme(n, seed)?,
        SchemeSource::Random => random_tilt_scheme(n, SamplingRegion::default(), count, seed, cfg.anchors)?,
        SchemeSource::Triangle => random_tilt_scheme(n, SamplingRegion::SphericalTriangle, count, seed, cfg.anchors)?,
        SchemeSource::Conical => conical_tilt_scheme(count)?,
        SchemeSource::DualAxis => dual_axis_scheme(cfg.scheme_q, cfg.scheme_alpha)?,
        SchemeSource::File(path) => {
            let bytes = io::read_file(path)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Format("scheme file is not UTF-8".into()))?;
            io::parse_scheme(&text)?
        }
    };
    match cfg.epsilon {
        Some(e) => scheme.with_epsilon(e),
        None => Ok(scheme),
    }
}

pub fn make_mask(cfg: &ExperimentConfig) -> crate::Result<Option<PhaseMask>> {
    let spec = cfg.spec()?;
    Ok(cfg.coded.then(|| random_phase_mask(spec, Seeds::derive(cfg.seed).mask)))
}

pub fn make_operator(cfg: &ExperimentConfig, scheme: &TiltScheme, mask: Option<&PhaseMask>) -> crate::Result<MeasurementOperator> {
    let flags = OperatorFlags {
        oversampled: cfg.oversampled,
        real_constraint: cfg.real_constraint,
    };
    Ok(MeasurementOperator::new(scheme, mask, cfg.spec()?, flags)?.with_cg(cfg.cg_tol, cfg.cg_max_iters))
}

/// Noiseless intensity patterns `|A f|^2`, one per direction.
pub fn clean_patterns(op: &MeasurementOperator, truth: &Object3D) -> crate::Result<Vec<DiffractionPattern>> {
    let y = op.forward(truth)?;
    let g2 = op.grid_len() * op.grid_len();
    y.chunks(g2)
        .zip(op.directions())
        .map(|(block, d)| {
            let intensities = block.iter().map(|v| v.norm_sqr()).collect();
            DiffractionPattern::new(*op.spec(), op.flags().oversampled, Some(*d), intensities)
        })
        .collect()
}

/// Poisson-noised copies at the requested NSR; `nsr = 0` returns the input.
pub fn noisy_patterns(patterns: &[DiffractionPattern], nsr: f64, seed: u64) -> crate::Result<Vec<DiffractionPattern>> {
    if nsr == 0.0 {
        return Ok(patterns.to_vec());
    }
    let s = solve_s_for_nsr(patterns, nsr)?;
    let noise = NoiseSpec::new(s, seed)?;
    Ok(patterns
        .par_iter()
        .enumerate()
        .map(|(t, pat)| poissonize_stream(pat, &noise, t as u64).scaled(1.0 / s))
        .collect())
}

/// Concatenated magnitudes of a pattern stack.
pub fn magnitudes(patterns: &[DiffractionPattern]) -> Vec<f64> {
    patterns.iter().flat_map(|p| p.magnitudes()).collect()
}

pub fn projections_of(obj: &Object3D, scheme: &TiltScheme) -> Vec<Projection2D> {
    scheme.directions().par_iter().map(|d| project(obj, d)).collect()
}

/// Reprojection residual `||R f - data|| / ||data||` over all directions.
pub fn reprojection_residual(obj: &Object3D, data: &[Projection2D]) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for proj in data {
        let re = project(obj, proj.direction());
        for (a, b) in re.values().iter().zip(proj.values()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
    }
    if den == 0.0 { num.sqrt() } else { (num / den).sqrt() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub nsr: f64,
    pub iterations: usize,
    pub residual: f64,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<MetricsRow>,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from("nsr,iterations,residual,correlation\n");
    for r in rows {
        writeln!(s, "{:.16e},{},{:.16e},{:.16e}", r.nsr, r.iterations, r.residual, r.correlation).expect("string write");
    }
    s
}

/// Runs AP on one noise level; `residual` is relative to `||b||`.
pub fn run_ap(
    cfg: &ExperimentConfig,
    op: &MeasurementOperator,
    clean: &[DiffractionPattern],
    truth: &Object3D,
    nsr: f64,
) -> StageResult<(MetricsRow, ReconReport)> {
    let seeds = Seeds::derive(cfg.seed);
    let data = noisy_patterns(clean, nsr, seeds.noise).stage("noise")?;
    let b = magnitudes(&data);
    let opts = ApOptions {
        max_iters: cfg.max_iters,
        init_seed: seeds.init,
        tol: cfg.ap_tol,
    };
    let report = ap_reconstruct_with(op, &b, &opts, Some(truth)).stage("reconstruct")?;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let row = MetricsRow {
        nsr,
        iterations: report.iterations,
        residual: report.final_residual() / bnorm.max(f64::MIN_POSITIVE),
        correlation: *report.correlation_history.last().expect("history is never empty"),
    };
    Ok((row, report))
}

fn write(path: &Path, data: &[u8]) -> StageResult<()> {
    io::write_file(path, data).stage("write")
}

/// Runs the configured experiment and writes its artifacts to `cfg.out`:
/// `config.txt`, `scheme.txt`, `truth.vol`, `metrics.csv`, one `recon_<k>.vol`
/// per row and, for AP, `history_<k>.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> StageResult<ExperimentOutcome> {
    cfg.validate().stage("config")?;
    let spec: LatticeSpec = cfg.spec().stage("config")?;
    let truth = make_phantom(cfg).stage("phantom")?;
    let scheme = make_scheme(cfg).stage("scheme")?;

    std::fs::create_dir_all(&cfg.out).map_err(Error::from).stage("write")?;
    write(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())?;
    write(&cfg.out.join("scheme.txt"), io::format_scheme(&scheme).as_bytes())?;
    write(&cfg.out.join("truth.vol"), &io::encode_volume(&truth).stage("write")?)?;

    let mut rows = Vec::with_capacity(cfg.nsr.len());
    match cfg.solver {
        Solver::Ap => {
            let mask = make_mask(cfg).stage("mask")?;
            let op = make_operator(cfg, &scheme, mask.as_ref()).stage("operator")?;
            let clean = clean_patterns(&op, &truth).stage("simulate")?;
            for (k, &level) in cfg.nsr.iter().enumerate() {
                let (row, report) = run_ap(cfg, &op, &clean, &truth, level)?;
                write(&cfg.out.join(format!("recon_{k}.vol")), &io::encode_volume(&report.final_object).stage("write")?)?;
                write(&cfg.out.join(format!("history_{k}.csv")), io::report_csv(&report).as_bytes())?;
                rows.push(row);
            }
        }
        Solver::Vandermonde => {
            let report = diversity_check(&scheme, &spec, cfg.diversity_tol).stage("diversity")?;
            if !report.satisfied {
                return Err(Error::DiversityFailure(Box::new(report))).stage("diversity");
            }
            let data = projections_of(&truth, &scheme);
            let tomo = vandermonde_tomography_report(&data, &spec).stage("reconstruct")?;
            let residual = reprojection_residual(&tomo.object, &data);
            let corr = correlation(&truth, &tomo.object).stage("score")?;
            write(&cfg.out.join("recon_0.vol"), &io::encode_volume(&tomo.object).stage("write")?)?;
            rows.push(MetricsRow {
                nsr: 0.0,
                iterations: 0,
                residual,
                correlation: corr,
            });
        }
        Solver::Unwrap => {
            let real = truth.real_part();
            let wrapped: Vec<Projection2D> = projections_of(&real, &scheme)
                .iter()
                .map(wrap_projection)
                .collect();
            let opts = UnwrapOptions {
                max_refinements: cfg.unwrap_refinements,
                ..UnwrapOptions::default()
            };
            let result = unwrap_tilt_series_with(&wrapped, &scheme, &spec, &opts).stage("reconstruct")?;
            let corr = correlation(&real, &result.object).stage("score")?;
            write(&cfg.out.join("recon_0.vol"), &io::encode_volume(&result.object).stage("write")?)?;
            rows.push(MetricsRow {
                nsr: 0.0,
                iterations: result.refinements,
                residual: result.residual,
                correlation: corr,
            });
        }
    }
    write(&cfg.out.join("metrics.csv"), metrics_csv(&rows).as_bytes())?;
    Ok(ExperimentOutcome {
        out_dir: cfg.out.clone(),
        rows,
    })
}
