use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn columbus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/columbus")
}

/// Writes a small Columbus configuration into `dir`.
fn config(dir: &Path, prior: &str, extra: &str) -> PathBuf {
    let d = columbus();
    let text = format!(
        "[run]\nseed = 3\noutput = out\n\
         [mcmc]\nburn_in = 200\nn_store = 300\n\
         [data]\npath = {}\nresponse = CRIME\ncovariates = INC, HOVAL\nnode = POLYID\nnode_base = 1\n\
         [support]\nkind = graph\nadjacency = {}\nnodes = 49\norder = 1\n\
         [model]\nprior = {prior}\n\
         [priors]\nxi2 = half_normal(3.16)\nlambda_scale2 = half_normal(3.16)\n{extra}",
        d.join("columbus.csv").display(),
        d.join("columbus_edges.txt").display(),
    );
    let p = dir.join("run.ini");
    fs::write(&p, text).unwrap();
    p
}

fn lmafield(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lmafield")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let o = lmafield(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "lma", "");
    let cfg = cfg.to_str().unwrap();
    let second = dir.path().join("again");
    run_ok(&["fit", "--config", cfg]);
    run_ok(&["fit", "--config", cfg, "--output", second.to_str().unwrap()]);

    let out = dir.path().join("out");
    for f in ["samples.csv", "summary.csv", "derived.csv", "predictions.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f} differs");
    }
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(samples.starts_with("# lmafield fit seed=3"));
    let columns = samples.lines().nth(1).unwrap().split(',').count();
    let rows = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count() - 2;
    // three coefficients, kappa2, lambda2 and sigma2
    assert_eq!(rows("summary.csv"), 6);
    // every other column but `chain` and `log_lik` is a derived quantity
    assert_eq!(rows("summary.csv") + rows("derived.csv"), columns - 2);
    assert_eq!(samples.lines().count() - 2, 300);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("\nseconds = ") && report.contains("\ness_per_second = "));
    assert_eq!(fs::read_to_string(out.join("predictions.csv")).unwrap().lines().count(), 2 + 49);
}

#[test]
fn cv_and_simulate_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "grf", "[cv]\nfolds = 3\n[simulate]\ndraws = 5\n[fixed]\nkappa2 = 0.5\n");
    let cfg = cfg.to_str().unwrap();
    run_ok(&["cv", "--config", cfg]);
    run_ok(&["simulate", "--config", cfg]);
    let out = dir.path().join("out");
    let report = fs::read_to_string(out.join("cv_report.txt")).unwrap();
    let bcvs: f64 = report.lines().find_map(|l| l.strip_prefix("bcvs = ")).unwrap().parse().unwrap();
    assert!(bcvs.is_finite());
    assert_eq!(fs::read_to_string(out.join("folds.csv")).unwrap().lines().count(), 2 + 49);
    assert_eq!(fs::read_to_string(out.join("simulate.csv")).unwrap().lines().count(), 2 + 5);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "lma", "[colour]\nblue = 1\n");
    let o = lmafield(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[colour]"));

    let cfg = config(dir.path(), "grf", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("response = CRIME", "response = THEFT");
    fs::write(&cfg, text).unwrap();
    let o = lmafield(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("THEFT"));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "grf", "");
    // the output directory cannot be created over a regular file
    fs::write(dir.path().join("out"), "").unwrap();
    let o = lmafield(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
