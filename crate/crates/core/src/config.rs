//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored, unknown or repeated keys are
//! errors. [`ExperimentConfig::to_text`] writes every key in a fixed order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhantomSource {
    /// Head-phantom raster sliced and stacked.
    Builtin,
    /// Uniform random voxels.
    Random,
    /// Smooth Gaussian blobs.
    Blobs,
    /// Binary PGM raster.
    Pgm(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeSource {
    Tset,
    /// Uniform slopes on `[0, 1)^2` in the x family.
    Random,
    /// Uniform on the positive-octant spherical triangle.
    Triangle,
    Conical,
    DualAxis,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ap,
    Vandermonde,
    Unwrap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub kappa: f64,
    pub phantom: PhantomSource,
    /// Peak voxel value of the blob phantom.
    pub phantom_peak: f64,
    pub scheme: SchemeSource,
    /// Number of directions; 0 picks the generator default.
    pub scheme_count: usize,
    pub scheme_q: usize,
    pub scheme_alpha: f64,
    pub anchors: bool,
    /// Adjacency threshold; `None` keeps the generator's default.
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub coded: bool,
    pub oversampled: bool,
    /// Noise levels to sweep; `0` is a noiseless run.
    pub nsr: Vec<f64>,
    pub solver: Solver,
    pub max_iters: usize,
    pub ap_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub real_constraint: bool,
    pub diversity_tol: f64,
    pub unwrap_refinements: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 7,
            p: 13,
            kappa: PI,
            phantom: PhantomSource::Builtin,
            phantom_peak: 1.0,
            scheme: SchemeSource::Tset,
            scheme_count: 0,
            scheme_q: 8,
            scheme_alpha: 0.0,
            anchors: false,
            epsilon: None,
            seed: 1,
            coded: true,
            oversampled: false,
            nsr: vec![0.0],
            solver: Solver::Ap,
            max_iters: 500,
            ap_tol: 1e-12,
            cg_tol: 1e-10,
            cg_max_iters: 200,
            real_constraint: true,
            diversity_tol: 1e-9,
            unwrap_refinements: 50,
            out: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 24] = [
    "n",
    "p",
    "kappa",
    "phantom",
    "phantom_peak",
    "scheme",
    "scheme_count",
    "scheme_q",
    "scheme_alpha",
    "anchors",
    "epsilon",
    "seed",
    "mask",
    "oversampled",
    "nsr",
    "solver",
    "max_iters",
    "ap_tol",
    "cg_tol",
    "cg_max_iters",
    "real_constraint",
    "diversity_tol",
    "unwrap_refinements",
    "out",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.n, self.p, self.kappa)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut p_given = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)))?;
            if seen.contains(known) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            seen.push(known);
            cfg.set(key, value)?;
            p_given |= key == "p";
        }
        if !p_given {
            cfg.p = 2 * cfg.n - 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "phantom" => {
                self.phantom = match value {
                    "builtin" => PhantomSource::Builtin,
                    "random" => PhantomSource::Random,
                    "blobs" => PhantomSource::Blobs,
                    path if path.ends_with(".pgm") => PhantomSource::Pgm(PathBuf::from(path)),
                    _ => return Err(Error::Config(format!("phantom: expected builtin, random, blobs or a .pgm path, got {value:?}"))),
                }
            }
            "phantom_peak" => self.phantom_peak = num(key, value)?,
            "scheme" => {
                self.scheme = match value {
                    "tset" => SchemeSource::Tset,
                    "random" => SchemeSource::Random,
                    "triangle" => SchemeSource::Triangle,
                    "conical" => SchemeSource::Conical,
                    "dual_axis" => SchemeSource::DualAxis,
                    path => match path.strip_prefix("file:") {
                        Some(p) => SchemeSource::File(PathBuf::from(p)),
                        None => return Err(Error::Config(format!("scheme: unknown generator {value:?}"))),
                    },
                }
            }
            "scheme_count" => self.scheme_count = num(key, value)?,
            "scheme_q" => self.scheme_q = num(key, value)?,
            "scheme_alpha" => self.scheme_alpha = num(key, value)?,
            "anchors" => self.anchors = boolean(key, value)?,
            "epsilon" => {
                self.epsilon = if value == "auto" { None } else { Some(num(key, value)?) };
            }
            "seed" => self.seed = num(key, value)?,
            "mask" => {
                self.coded = match value {
                    "coded" => true,
                    "none" => false,
                    _ => return Err(Error::Config(format!("mask: expected coded or none, got {value:?}"))),
                }
            }
            "oversampled" => self.oversampled = boolean(key, value)?,
            "nsr" => {
                self.nsr = value
                    .split(',')
                    .map(|v| num::<f64>(key, v.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "solver" => {
                self.solver = match value {
                    "ap" => Solver::Ap,
                    "vandermonde" => Solver::Vandermonde,
                    "unwrap" => Solver::Unwrap,
                    _ => return Err(Error::Config(format!("solver: expected ap, vandermonde or unwrap, got {value:?}"))),
                }
            }
            "max_iters" => self.max_iters = num(key, value)?,
            "ap_tol" => self.ap_tol = num(key, value)?,
            "cg_tol" => self.cg_tol = num(key, value)?,
            "cg_max_iters" => self.cg_max_iters = num(key, value)?,
            "real_constraint" => self.real_constraint = boolean(key, value)?,
            "diversity_tol" => self.diversity_tol = num(key, value)?,
            "unwrap_refinements" => self.unwrap_refinements = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.nsr.is_empty() || self.nsr.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("nsr: need a list of nonnegative values".into()));
        }
        if self.solver != Solver::Ap && self.nsr.iter().any(|&v| v > 0.0) {
            return Err(Error::Config("nsr: Poisson noise applies to the ap solver only".into()));
        }
        if !(self.phantom_peak > 0.0) {
            return Err(Error::Config("phantom_peak must be positive".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::Config("epsilon must be positive".into()));
            }
        }
        if !(0.0..1.0).contains(&self.scheme_alpha) {
            return Err(Error::Config("scheme_alpha must lie in [0, 1)".into()));
        }
        if !(self.cg_tol > 0.0 && self.ap_tol >= 0.0 && self.diversity_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form listing every key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
        line("n", self.n.to_string());
        line("p", self.p.to_string());
        line("kappa", format!("{:?}", self.kappa));
        line(
            "phantom",
            match &self.phantom {
                PhantomSource::Builtin => "builtin".into(),
                PhantomSource::Random => "random".into(),
                PhantomSource::Blobs => "blobs".into(),
                PhantomSource::Pgm(p) => p.display().to_string(),
            },
        );
        line("phantom_peak", format!("{:?}", self.phantom_peak));
        line(
            "scheme",
            match &self.scheme {
                SchemeSource::Tset => "tset".into(),
                SchemeSource::Random => "random".into(),
                SchemeSource::Triangle => "triangle".into(),
                SchemeSource::Conical => "conical".into(),
                SchemeSource::DualAxis => "dual_axis".into(),
                SchemeSource::File(p) => format!("file:{}", p.display()),
            },
        );
        line("scheme_count", self.scheme_count.to_string());
        line("scheme_q", self.scheme_q.to_string());
        line("scheme_alpha", format!("{:?}", self.scheme_alpha));
        line("anchors", self.anchors.to_string());
        line(
            "epsilon",
            match self.epsilon {
                Some(e) => format!("{e:?}"),
                None => "auto".into(),
            },
        );
        line("seed", self.seed.to_string());
        line("mask", if self.coded { "coded" } else { "none" }.into());
        line("oversampled", self.oversampled.to_string());
        line(
            "nsr",
            self.nsr.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "),
        );
        line(
            "solver",
            match self.solver {
                Solver::Ap => "ap",
                Solver::Vandermonde => "vandermonde",
                Solver::Unwrap => "unwrap",
            }
            .into(),
        );
        line("max_iters", self.max_iters.to_string());
        line("ap_tol", format!("{:?}", self.ap_tol));
        line("cg_tol", format!("{:?}", self.cg_tol));
        line("cg_max_iters", self.cg_max_iters.to_string());
        line("real_constraint", self.real_constraint.to_string());
        line("diversity_tol", format!("{:?}", self.diversity_tol));
        line("unwrap_refinements", self.unwrap_refinements.to_string());
        line("out", self.out.display().to_string());
        out
    }
}
