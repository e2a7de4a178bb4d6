use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn difftomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_difftomo"))
        .args(args)
        .env("DIFFTOMO_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn verify_passes() {
    let out = difftomo(&["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn config_prints_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# small\nn=5\nsolver = vandermonde\n");
    let out = difftomo(&["--config", &cfg, "--seed", "9", "config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n = 5\np = 9\n"), "{text}");
    assert!(text.contains("\nseed = 9\n"));
    assert!(text.contains("\nsolver = vandermonde\n"));
}

#[test]
fn run_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\nphantom = random\nnsr = 0.5\nmax_iters = 20\n");
    let metrics = |seed: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let o = difftomo(&["--config", &cfg, "--seed", seed, "--out", out_dir.to_str().unwrap(), "run"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out_dir.join("metrics.csv")).unwrap()
    };
    let a = metrics("3", "a");
    assert_eq!(a, metrics("3", "b"));
    assert_ne!(a, metrics("4", "c"));
}

#[test]
fn stages_can_be_run_separately() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &format!("n = 4\nnsr = 0, 0.5\nmax_iters = 30\nout = {}\n", out.display()));
    for cmd in ["phantom", "scheme", "simulate"] {
        let o = difftomo(&["--config", &cfg, cmd]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["phantom.vol", "scheme.txt", "projections.prj", "patterns_0.pat", "patterns_1.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let input = out.join("patterns_0.pat");
    let o = difftomo(&["--config", &cfg, "reconstruct", "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("recon.vol").exists());
}

#[test]
fn failures_exit_nonzero_with_the_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\nphantom = nowhere.pgm\n");
    let out_dir = dir.path().join("o");
    let o = difftomo(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "run"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("phantom stage failed"));

    let cfg = write_config(dir.path(), "n = 4\ncolour = blue\n");
    let o = difftomo(&["--config", &cfg, "run"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key \"colour\""));
}
