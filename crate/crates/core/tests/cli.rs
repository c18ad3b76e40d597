use std::path::Path;
use std::process::{Command, Output};

use svde::cli::{run, Command as Study, ExperimentConfig};

fn svde(args: &[&str], config: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svde"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .env("SVDE_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn solve_empty_kernel_without_noise_is_constant() {
    let cfg = ExperimentConfig::parse(
        Study::Solve,
        "kernel = empty\nN = 4\nnoise = off\nd = 2\nx = 0.25, -1\n",
    )
    .unwrap();
    let out = run(&cfg, 1).unwrap();
    assert!(!out.failed);
    let rows = rows(&out.csv);
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert_eq!(r[0], "solve");
        let expect = if r[7].starts_with("X0") { 0.25 } else { -1.0 };
        assert_eq!(r[8].parse::<f64>().unwrap(), expect);
    }
}

#[test]
fn cauchy_residuals_decrease_under_doubling() {
    let cfg = ExperimentConfig::parse(Study::CauchyCheck, "f = s\nk = 2\nN = 250\n").unwrap();
    let out = run(&cfg, 1).unwrap();
    let residuals: Vec<f64> = rows(&out.csv)
        .iter()
        .filter(|r| r[7].starts_with("residual"))
        .map(|r| r[8].parse().unwrap())
        .collect();
    assert_eq!(residuals.len(), 3);
    assert!(residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(!out.failed);

    let brownian = ExperimentConfig::parse(Study::CauchyCheck, "f = brownian\nk = 1\nN = 100\n").unwrap();
    assert!(!run(&brownian, 1).unwrap().failed);
}

#[test]
fn oracle_compare_flags_pass() {
    let cfg = ExperimentConfig::parse(
        Study::OracleCompare,
        "kernel = cos_x\nT = 0.5\nN = 100\nn_paths = 20000\nseed = 5\nphi = id, square\n",
    )
    .unwrap();
    let out = run(&cfg, 0).unwrap();
    let diffs: Vec<_> = rows(&out.csv)
        .into_iter()
        .filter(|r| r[7].starts_with("diff"))
        .collect();
    assert_eq!(diffs.len(), 2);
    assert!(diffs.iter().all(|r| r[10] == "PASS"), "{}", out.csv);
}

#[test]
fn every_command_runs_on_a_small_config() {
    let cases = [
        (
            Study::Solve,
            "kernel = fractional\nalpha = -0.3\nn_max = 40\nT = 1\nN = 50\nscheme = picard\n",
        ),
        (Study::GirsanovCheck, "kernel = sin_kernel\nN = 50\nn_paths = 500\n"),
        (
            Study::DerivativeCheck,
            "kernel = poly\nexponents = 0, 1\nfields = cos_x, linear_x\nscales = 1, -0.5\nN = 200\nn_paths = 10\n",
        ),
        (
            Study::MollifyStudy,
            "kernel = cos_x\nT = 0.5\nN = 32\nn_paths = 400\nlevels = 2, 8\nquad_points = 8\n",
        ),
        (
            Study::HolderStudy,
            "kernel = linear_x\nlambda = 0.5\nT = 0.5\nN = 64\nn_paths = 50\n",
        ),
    ];
    for (cmd, text) in cases {
        let cfg = ExperimentConfig::parse(cmd, text).unwrap();
        let out = run(&cfg, 1).unwrap_or_else(|e| panic!("{cmd}: {e}"));
        assert!(out.csv.lines().count() > 1, "{cmd}");
        assert!(!out.failed, "{cmd}:\n{}", out.csv);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.cfg", "kernel = cos_x\nN = 20\nn_paths = 200\n");
    let out = svde(&["girsanov-check"], &good, "1");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("command,kernel,T,N,d,n_paths,seed,metric,value,std_error"));

    let strict = write(
        dir.path(),
        "strict.cfg",
        "kernel = cos_x\nN = 20\nn_paths = 200\ness_min = 1.5\n",
    );
    assert_eq!(svde(&["girsanov-check"], &strict, "1").status.code(), Some(0));
    assert_eq!(
        svde(&["girsanov-check", "--assert"], &strict, "1").status.code(),
        Some(3)
    );

    let invalid = [
        "kernel = fractional\nT = 2.5\n",
        "kernel = tanh_x\n",
        "N = 0\n",
        "colour = blue\n",
        "command = holder-study\n",
    ];
    for (i, text) in invalid.iter().enumerate() {
        let p = write(dir.path(), &format!("bad{i}.cfg"), text);
        assert_eq!(svde(&["solve"], &p, "1").status.code(), Some(2), "{text}");
    }
    assert_eq!(
        svde(&["solve"], &dir.path().join("missing.cfg"), "1").status.code(),
        Some(2)
    );
    assert_eq!(svde(&["plot"], &good, "1").status.code(), Some(2));
    assert_eq!(svde(&["solve"], &good, "many").status.code(), Some(2));
    // sign has no gradient
    let sign = write(dir.path(), "sign.cfg", "kernel = sign_x\nN = 20\nn_paths = 2\n");
    assert_eq!(svde(&["derivative-check"], &sign, "1").status.code(), Some(2));
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.cfg",
        "kernel = cos_x\nT = 0.5\nN = 64\nn_paths = 100\nseed = 3\n",
    );
    let csv = dir.path().join("h.csv");
    let to_file = svde(&["holder-study", "--out", csv.to_str().unwrap()], &cfg, "2");
    assert_eq!(to_file.status.code(), Some(0));
    assert!(to_file.stdout.is_empty());
    let to_stdout = svde(&["holder-study"], &cfg, "1");
    assert_eq!(std::fs::read(&csv).unwrap(), to_stdout.stdout);
}
