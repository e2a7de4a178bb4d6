use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use difftomo::config::{ExperimentConfig, Solver};
use difftomo::experiment::{self, Seeds};
use difftomo::io;
use difftomo::recon::{
    ap_reconstruct_with, unwrap_tilt_series_with, vandermonde_tomography_report, ApOptions, UnwrapOptions,
};
use difftomo::tilt::{diversity_check, is_epsilon_connected};

#[derive(Parser)]
#[command(name = "difftomo", version, about = "Tomographic phase retrieval and phase unwrapping")]
struct Cli {
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured phantom to `phantom.vol`.
    Phantom,
    /// Write the configured tilt scheme to `scheme.txt` and summarize it.
    Scheme,
    /// Simulate diffraction patterns (`patterns_<k>.pat`, `.csv`) and projections.
    Simulate,
    /// Reconstruct from simulated data with the configured solver.
    Reconstruct {
        /// Pattern stack for the AP solver, projections otherwise.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full experiment and write `metrics.csv`.
    Run,
    /// Run built-in numerical self-checks.
    Verify,
    /// Print the canonical form of the configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DIFFTOMO_THREADS") {
        let threads: usize = v.parse().with_context(|| format!("DIFFTOMO_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(cfg.out.join(name))
}

fn save(path: &Path, data: &[u8]) -> Result<()> {
    io::write_file(path, data).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let truth = experiment::make_phantom(cfg).context("phantom")?;
    let scheme = experiment::make_scheme(cfg).context("scheme")?;
    save(&out_file(cfg, "scheme.txt")?, io::format_scheme(&scheme).as_bytes())?;
    let projections = experiment::projections_of(&truth, &scheme);
    save(&out_file(cfg, "projections.prj")?, &io::encode_projections(&projections)?)?;
    if cfg.solver != Solver::Ap {
        return Ok(());
    }
    let mask = experiment::make_mask(cfg).context("mask")?;
    let op = experiment::make_operator(cfg, &scheme, mask.as_ref()).context("operator")?;
    let clean = experiment::clean_patterns(&op, &truth).context("simulate")?;
    let seed = Seeds::derive(cfg.seed).noise;
    for (k, &level) in cfg.nsr.iter().enumerate() {
        let data = experiment::noisy_patterns(&clean, level, seed).context("noise")?;
        save(&out_file(cfg, &format!("patterns_{k}.pat"))?, &io::encode_patterns(&data)?)?;
        save(&out_file(cfg, &format!("patterns_{k}.csv"))?, io::patterns_csv(&data).as_bytes())?;
    }
    Ok(())
}

fn reconstruct(cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let spec = cfg.spec()?;
    let scheme = experiment::make_scheme(cfg).context("scheme")?;
    let bytes = io::read_file(input).with_context(|| format!("reading {}", input.display()))?;
    let object = match cfg.solver {
        Solver::Ap => {
            let patterns = io::decode_patterns(&bytes)?;
            if patterns.len() != scheme.len() {
                bail!("{} patterns for {} directions", patterns.len(), scheme.len());
            }
            let mask = experiment::make_mask(cfg).context("mask")?;
            let op = experiment::make_operator(cfg, &scheme, mask.as_ref()).context("operator")?;
            let opts = ApOptions {
                max_iters: cfg.max_iters,
                init_seed: Seeds::derive(cfg.seed).init,
                tol: cfg.ap_tol,
            };
            let report = ap_reconstruct_with(&op, &experiment::magnitudes(&patterns), &opts, None)?;
            println!("iterations {} residual {:.6e}", report.iterations, report.final_residual());
            save(&out_file(cfg, "history.csv")?, io::report_csv(&report).as_bytes())?;
            report.final_object
        }
        Solver::Vandermonde => {
            let tomo = vandermonde_tomography_report(&io::decode_projections(&bytes)?, &spec)?;
            println!("family {} used {} max residual {:.3e}", tomo.family.letter(), tomo.used, tomo.max_residual);
            tomo.object
        }
        Solver::Unwrap => {
            let wrapped = io::decode_projections(&bytes)?;
            let opts = UnwrapOptions {
                max_refinements: cfg.unwrap_refinements,
                ..UnwrapOptions::default()
            };
            let result = unwrap_tilt_series_with(&wrapped, &scheme, &spec, &opts)?;
            println!(
                "refinements {} residual {:.3e} offset {} converged {}",
                result.refinements, result.residual, result.detected_offset, result.converged
            );
            result.object
        }
    };
    save(&out_file(cfg, "recon.vol")?, &io::encode_volume(&object)?)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Config => print!("{}", cfg.to_text()),
        Command::Phantom => {
            let obj = experiment::make_phantom(&cfg).context("phantom")?;
            save(&out_file(&cfg, "phantom.vol")?, &io::encode_volume(&obj)?)?;
        }
        Command::Scheme => {
            let scheme = experiment::make_scheme(&cfg).context("scheme")?;
            let spec = cfg.spec()?;
            println!("directions {} epsilon {}", scheme.len(), scheme.epsilon());
            println!("epsilon-connected {}", is_epsilon_connected(&scheme));
            match diversity_check(&scheme, &spec, cfg.diversity_tol) {
                Ok(r) => println!(
                    "diversity ({} family) {} min gap {:.3e}",
                    r.family.letter(),
                    r.satisfied,
                    r.min_node_gap
                ),
                Err(e) => println!("diversity unavailable: {e}"),
            }
            save(&out_file(&cfg, "scheme.txt")?, io::format_scheme(&scheme).as_bytes())?;
        }
        Command::Simulate => simulate(&cfg)?,
        Command::Reconstruct { input } => reconstruct(&cfg, input)?,
        Command::Run => {
            let outcome = experiment::run_experiment(&cfg)?;
            print!("{}", experiment::metrics_csv(&outcome.rows));
        }
        Command::Verify => {
            let checks = difftomo::verify::self_check();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| run(&cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
