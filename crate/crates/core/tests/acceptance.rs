//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svde::cli::{self, ExperimentConfig};
use svde::girsanov::{estimate_weighted, reconstruction_residual, weight_diagnostics, weighted_samples};
use svde::kernel::{eval_kernel, fractional_kernel, sin_kernel, Constant, Cosine, Linear, Scaled, Sign};
use svde::mollify::{mollify_kernel, weak_convergence_study};
use svde::montecarlo::{estimate_states, euler_states, independent_seed};
use svde::sensitivity::{holder_statistic, DerivativeSolver};
use svde::solver::{solve_deterministic, solve_euler, SolutionPath};
use svde::{make_grid, sample_brownian, KernelSeries, TestFunction};

type Verdict = (bool, String);
type Outcome = Result<Verdict, String>;

fn cos_kernel(horizon: f64) -> KernelSeries {
    KernelSeries::new(horizon)
        .unwrap()
        .with_term(0, Cosine::field(1.0))
        .unwrap()
}

fn c01_cauchy_identity() -> Outcome {
    let cfg = ExperimentConfig::parse(
        cli::Command::CauchyCheck,
        "f = s\nk = 2\nT = 1\nlevels = 1000, 2000, 4000\nresidual_max = 1e-3\nexpected_order = 1\norder_tol = 0.3\n",
    )
    .map_err(|e| e.to_string())?;
    let out = cli::run(&cfg, 0).map_err(|e| e.to_string())?;
    let values: Vec<&str> = out
        .csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(8).unwrap_or(""))
        .collect();
    Ok((!out.failed, format!("residuals/orders {values:?}")))
}

fn c02_cosh_oracle() -> Outcome {
    let kernel = KernelSeries::new(1.0)
        .and_then(|k| k.with_term(1, Linear::field(1.0)))
        .map_err(|e| e.to_string())?;
    let err = |n: usize| -> Result<f64, String> {
        let grid = make_grid(1.0, n).map_err(|e| e.to_string())?;
        let path = solve_deterministic(&kernel, &[1.0], &grid).map_err(|e| e.to_string())?;
        Ok((path.terminal()[0] - 1f64.cosh()).abs())
    };
    let (e1, e2) = (err(10_000)?, err(20_000)?);
    let ratio = e1 / e2;
    Ok((
        e1 <= 5e-4 && (1.6..=2.4).contains(&ratio),
        format!("|X(1) - cosh 1| = {e1:.3e}, ratio = {ratio:.3}"),
    ))
}

fn c03_exponential_oracle() -> Outcome {
    let kernel = KernelSeries::new(1.0)
        .and_then(|k| k.with_term(0, Linear::field(1.0)))
        .map_err(|e| e.to_string())?;
    let grid = make_grid(1.0, 10_000).map_err(|e| e.to_string())?;
    let path = solve_deterministic(&kernel, &[1.0], &grid).map_err(|e| e.to_string())?;
    let err = (path.terminal()[0] - std::f64::consts::E).abs();
    Ok((err <= 1e-3, format!("|X(1) - e| = {err:.3e}")))
}

const PATHS_MC: usize = 100_000;

fn c04_c05_girsanov() -> (Outcome, Outcome) {
    let run = || -> Result<(Verdict, Verdict), String> {
        let grid = make_grid(0.5, 2000).map_err(|e| e.to_string())?;
        let kernel = cos_kernel(0.5);
        let n = grid.steps();
        let seed = 2024;
        let samples = weighted_samples(&kernel, &[0.0], &grid, n, n, PATHS_MC, seed).map_err(|e| e.to_string())?;
        let diag = weight_diagnostics(&samples).map_err(|e| e.to_string())?;
        let mean_ok = diag.martingale_mean_ok(3.0);
        let ess_ok = diag.ess_fraction() >= 0.5;
        let c4 = (
            mean_ok && ess_ok,
            format!(
                "mean weight {:.5} +- {:.5}, ESS fraction {:.4}",
                diag.mean_weight,
                diag.mean_weight_se,
                diag.ess_fraction()
            ),
        );

        let states =
            euler_states(&kernel, &[0.0], n, &grid, PATHS_MC, independent_seed(seed)).map_err(|e| e.to_string())?;
        let mut all = true;
        let mut notes = Vec::new();
        for phi in [TestFunction::Id, TestFunction::Square, TestFunction::Sin] {
            let euler = estimate_states(&states, &phi);
            let weak = estimate_weighted(&samples, &phi);
            let z = (euler.mean - weak.mean).abs() / euler.combined_se(&weak);
            all &= z <= 3.0;
            notes.push(format!("{phi}: {:.5} vs {:.5} ({z:.2} SE)", euler.mean, weak.mean));
        }
        Ok((c4, (all, notes.join("; "))))
    };
    match run() {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(e.clone()), Err(e)),
    }
}

fn c06_reconstruction() -> Outcome {
    let grid = make_grid(1.0, 1000).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut all = true;
    for p in 0..20u64 {
        let m0 = rng.random_range(0..=4u32);
        let m1 = m0 + rng.random_range(1..=3u32);
        let kernel = KernelSeries::new(1.0)
            .and_then(|k| k.with_term(m0, Cosine::field(rng.random_range(-2.0..2.0))))
            .and_then(|k| k.with_term(m1, Scaled::field(rng.random_range(-2.0..2.0), Sign::field())))
            .map_err(|e| e.to_string())?;
        let noise = sample_brownian(&grid, 1, 6, p).map_err(|e| e.to_string())?;
        let state = SolutionPath::drift_free(&[rng.random_range(-1.0..1.0)], &noise).map_err(|e| e.to_string())?;
        let r = reconstruction_residual(&kernel, &state).map_err(|e| e.to_string())?;
        let bound = 5.0 * grid.dt() * kernel.tail_bound();
        all &= r <= bound;
        worst = worst.max(r / bound);
    }
    Ok((all, format!("worst residual / (5 dt bound) = {worst:.3}")))
}

fn c07_flow_gradient() -> Outcome {
    let grid = make_grid(0.5, 10_000).map_err(|e| e.to_string())?;
    let kernel = cos_kernel(0.5);
    let solver = DerivativeSolver::new(&kernel, &grid).map_err(|e| e.to_string())?;
    let (x, h, n) = (0.3, 1e-4, grid.steps());
    let mut within = 0;
    let mut worst = 0.0f64;
    for p in 0..100u64 {
        let noise = sample_brownian(&grid, 1, 7, p).map_err(|e| e.to_string())?;
        let path = solve_euler(&kernel, &[x], &noise, &grid).map_err(|e| e.to_string())?;
        let flow = solver.malliavin_at(&path, 0, n).map_err(|e| e.to_string())?[0];
        let up = solve_euler(&kernel, &[x + h], &noise, &grid).map_err(|e| e.to_string())?;
        let down = solve_euler(&kernel, &[x - h], &noise, &grid).map_err(|e| e.to_string())?;
        let fd = (up.terminal()[0] - down.terminal()[0]) / (2.0 * h);
        let rel = ((flow - fd) / flow).abs();
        worst = worst.max(rel);
        within += usize::from(rel <= 1e-3);
    }
    Ok((within >= 95, format!("{within}/100 within 1e-3, worst {worst:.2e}")))
}

fn c08_malliavin_exponential() -> Outcome {
    let lambda = 1.0;
    let grid = make_grid(1.0, 4000).map_err(|e| e.to_string())?;
    let kernel = KernelSeries::new(1.0)
        .and_then(|k| k.with_term(0, Linear::field(lambda)))
        .map_err(|e| e.to_string())?;
    let solver = DerivativeSolver::new(&kernel, &grid).map_err(|e| e.to_string())?;
    let noise = sample_brownian(&grid, 1, 8, 0).map_err(|e| e.to_string())?;
    let path = solve_euler(&kernel, &[0.0], &noise, &grid).map_err(|e| e.to_string())?;
    let n = grid.steps();
    let mut worst = 0.0f64;
    for u in 0..=n {
        let d = solver.malliavin_at(&path, u, n).map_err(|e| e.to_string())?[0];
        worst = worst.max((d - (lambda * (1.0 - grid.node(u))).exp()).abs());
    }
    Ok((
        worst <= 10.0 * grid.dt(),
        format!("max error {worst:.3e} vs 10 dt = {:.3e}", 10.0 * grid.dt()),
    ))
}

fn c09_holder() -> Outcome {
    let grid = make_grid(0.5, 256).map_err(|e| e.to_string())?;
    let kernel = cos_kernel(0.5);
    let n = grid.steps();
    let pairs: Vec<(usize, usize)> = (2..=6).map(|e| (n >> e, 0)).collect();
    let stat = holder_statistic(&kernel, &[0.0], &grid, 10_000, 9, &pairs, n).map_err(|e| e.to_string())?;
    let lower = stat.bootstrap_lower_bound(200, 0.05, independent_seed(9));
    Ok((
        lower.is_some_and(|l| l > 0.0),
        format!("slope {:?}, 5% bootstrap quantile {lower:?}", stat.slope),
    ))
}

fn c10_mollification() -> Outcome {
    let grid = make_grid(0.5, 256).map_err(|e| e.to_string())?;
    let base = KernelSeries::new(0.5)
        .and_then(|k| k.with_term(0, Sign::field()))
        .map_err(|e| e.to_string())?;
    let levels = [4u32, 16, 64]
        .iter()
        .map(|&n| mollify_kernel(&base, n, 32, 1).map(|k| (n, k)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let phi = TestFunction::BoundedId(1.0);
    let table = weak_convergence_study(&levels, &base, &[0.0], &phi, grid.steps(), &grid, PATHS_MC, 10)
        .map_err(|e| e.to_string())?;
    let ests: Vec<String> = table.rows.iter().map(|r| format!("{:.5}", r.estimate.mean)).collect();
    Ok((
        table.finest_matches_reference(3.0) && table.trend_toward_reference(3.0),
        format!(
            "levels 4/16/64: {}, reference {:.5} +- {:.5}",
            ests.join("/"),
            table.reference.mean,
            table.reference.std_error
        ),
    ))
}

fn c11_sin_truncation() -> Outcome {
    let kernel = sin_kernel(Constant::field(vec![1.0]), 8, 1.0).map_err(|e| e.to_string())?;
    let bound = 1.0 / (1..=19).fold(1.0, |a, k| a * k as f64);
    let mut worst = 0.0f64;
    let mut all = true;
    for i in 0..1000 {
        let lag = i as f64 / 999.0;
        let v = eval_kernel(&kernel, lag, 0.0, &[0.0]).map_err(|e| e.to_string())?[0];
        let err = (v - lag.sin()).abs();
        // the bound lies below double resolution; allow a few ulps of the value
        all &= err <= bound + 4.0 * f64::EPSILON * lag.sin().abs();
        worst = worst.max(err);
    }
    Ok((
        all,
        format!("max error {worst:.2e}, 1/19! = {bound:.2e} (+4 ulp rounding)"),
    ))
}

fn c12_fractional() -> Outcome {
    let alpha = -0.4;
    let kernel = fractional_kernel(alpha, Constant::field(vec![1.0]), 200, 1.9).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..=1000 {
        let lag = 0.2 + 1.6 * i as f64 / 1000.0;
        let v = eval_kernel(&kernel, lag, 0.0, &[0.0]).map_err(|e| e.to_string())?[0];
        let direct = lag.powf(alpha);
        worst = worst.max(((v - direct) / direct).abs());
    }
    Ok((worst <= 1e-2, format!("max relative error {worst:.2e}")))
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        (
            "oracle-compare",
            "kernel = cos_x\nT = 0.5\nN = 200\nn_paths = 2000\nseed = 13\nphi = id, square, sin\n",
        ),
        (
            "holder-study",
            "kernel = cos_x\nT = 0.5\nN = 128\nn_paths = 500\nseed = 13\n",
        ),
        (
            "mollify-study",
            "kernel = sign_x\nT = 0.5\nN = 64\nn_paths = 1000\nseed = 13\nquad_points = 8\n",
        ),
        (
            "derivative-check",
            "kernel = sin_kernel\nT = 0.5\nN = 500\nn_paths = 20\nseed = 13\nx = 0.2\n",
        ),
    ];
    let exe = env!("CARGO_BIN_EXE_svde");
    let mut notes = Vec::new();
    let mut all = true;
    for (command, text) in cases {
        let cfg = dir.path().join(format!("{command}.cfg"));
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for threads in ["1", "4", "0", "1"] {
            let out = Command::new(exe)
                .args([command, "--config"])
                .arg(&cfg)
                .env("SVDE_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("{command} exited with {}", out.status));
            }
            outputs.push(out.stdout);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        all &= same;
        notes.push(format!("{command}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    Ok((all, notes.join(", ")))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        results.push((id, name, outcome, t.elapsed().as_secs_f64()));
    };
    timed(1, "Cauchy identity", &c01_cauchy_identity);
    timed(2, "deterministic cosh oracle", &c02_cosh_oracle);
    timed(3, "exponential oracle", &c03_exponential_oracle);
    let t = Instant::now();
    let (c4, c5) = c04_c05_girsanov();
    let secs = t.elapsed().as_secs_f64();
    results.push((4, "martingale mean and ESS", c4, secs));
    results.push((5, "Girsanov/Euler oracle equivalence", c5, secs));
    let mut timed = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        results.push((id, name, outcome, t.elapsed().as_secs_f64()));
    };
    timed(6, "drift-functional reconstruction", &c06_reconstruction);
    timed(7, "flow-derivative gradient check", &c07_flow_gradient);
    timed(8, "Malliavin exponential oracle", &c08_malliavin_exponential);
    timed(9, "Hoelder statistic", &c09_holder);
    timed(10, "weak convergence under mollification", &c10_mollification);
    timed(11, "sin-kernel truncation", &c11_sin_truncation);
    timed(12, "fractional kernel", &c12_fractional);
    timed(13, "determinism across SVDE_THREADS", &c13_determinism);

    results.sort_by_key(|r| r.0);
    let mut failures = 0;
    for (id, name, outcome, secs) in &results {
        let (pass, detail) = match outcome {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "{} criterion {id:>2} {name}: {detail} [{secs:.1}s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failures,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
