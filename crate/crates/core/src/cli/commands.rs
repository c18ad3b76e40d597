use crate::girsanov::{estimate_weighted, weight_diagnostics, weighted_samples};
use crate::grid::{make_grid, sample_brownian, BrownianPath, TimeGrid};
use crate::kernel::{cauchy_check, GridFunction, KernelSeries};
use crate::mollify::{mollify_kernel, weak_convergence_study};
use crate::montecarlo::{estimate_states, euler_states, independent_seed, map_paths, Estimate};
use crate::phi::TestFunction;
use crate::sensitivity::{frobenius, holder_statistic, DerivativeSolver};
use crate::solver::{picard_solve, solve_euler, solve_euler_naive, EulerSolver};

use super::config::{Command, ExperimentConfig};
use super::csv::{Row, RunContext};
use super::{presets, CliError};

type Output = Result<(RunContext, Vec<Row>), CliError>;

/// Values shared by most commands.
struct Setup {
    grid: TimeGrid,
    dim: usize,
    x: Vec<f64>,
    seed: u64,
    n_paths: usize,
    t_index: usize,
    z: f64,
    kernel: KernelSeries,
    kernel_name: String,
}

impl Setup {
    fn new(cfg: &ExperimentConfig, default_paths: usize) -> Result<Self, CliError> {
        let horizon: f64 = cfg.get("T", 1.0)?;
        let steps: usize = cfg.get("N", 1000)?;
        let grid = make_grid(horizon, steps)?;
        let dim: usize = cfg.get("d", 1)?;
        if dim == 0 {
            return Err(CliError::Config("`d` must be positive".into()));
        }
        let x: Vec<f64> = cfg.list("x")?.unwrap_or_else(|| vec![0.0]);
        let x = match x.len() {
            1 => vec![x[0]; dim],
            n if n == dim => x,
            n => return Err(CliError::Config(format!("`x` has {n} entries but d = {dim}"))),
        };
        let t_index = cfg.get("t_index", steps)?;
        grid.check_index(t_index)?;
        let z: f64 = cfg.get("z", 3.0)?;
        if !(z > 0.0) {
            return Err(CliError::Config("`z` must be positive".into()));
        }
        Ok(Self {
            kernel: presets::kernel(cfg, horizon, dim)?,
            kernel_name: cfg.str_or("kernel", "empty").to_string(),
            grid,
            dim,
            x,
            seed: cfg.get("seed", 0)?,
            n_paths: cfg.get("n_paths", default_paths)?,
            t_index,
            z,
        })
    }

    fn context(&self, cfg: &ExperimentConfig, n_paths: usize) -> RunContext {
        RunContext {
            command: cfg.command.to_string(),
            kernel: self.kernel_name.clone(),
            horizon: self.grid.horizon(),
            steps: self.grid.steps(),
            dim: self.dim,
            n_paths,
            seed: self.seed,
        }
    }

    fn require_paths(&self, min: usize) -> Result<(), CliError> {
        if self.n_paths < min {
            return Err(CliError::Config(format!("`n_paths` must be at least {min}")));
        }
        Ok(())
    }
}

fn phis(cfg: &ExperimentConfig, default: &str) -> Result<Vec<TestFunction>, CliError> {
    Ok(cfg
        .str_or("phi", default)
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?)
}

pub(super) fn dispatch(cfg: &ExperimentConfig) -> Output {
    match cfg.command {
        Command::Solve => solve(cfg),
        Command::GirsanovCheck => girsanov_check(cfg),
        Command::OracleCompare => oracle_compare(cfg),
        Command::DerivativeCheck => derivative_check(cfg),
        Command::CauchyCheck => cauchy(cfg),
        Command::MollifyStudy => mollify_study(cfg),
        Command::HolderStudy => holder_study(cfg),
    }
}

fn solve(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 1)?;
    let grid = &setup.grid;
    let noise = if cfg.switch("noise", true)? {
        sample_brownian(grid, setup.dim, setup.seed, cfg.get("path_index", 0)?)?
    } else {
        BrownianPath::zero(grid, setup.dim)?
    };
    let mut rows = Vec::new();
    let path = match cfg.str_or("scheme", "euler") {
        "euler" => solve_euler(&setup.kernel, &setup.x, &noise, grid)?,
        "naive" => solve_euler_naive(&setup.kernel, &setup.x, &noise, grid)?,
        "picard" => {
            let sol = picard_solve(
                &setup.kernel,
                &setup.x,
                &noise,
                grid,
                cfg.get("max_iters", 200)?,
                cfg.get("tol", 1e-12)?,
            )?;
            rows.push(Row::value("picard_iterations", sol.iterations as f64));
            rows.push(Row::value("picard_last_change", sol.last_change));
            sol.path
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown scheme `{other}` (euler, picard, naive)"
            )))
        }
    };
    let stride: usize = cfg.get("stride", 1)?;
    if stride == 0 {
        return Err(CliError::Config("`stride` must be positive".into()));
    }
    let mut nodes: Vec<usize> = (0..=grid.steps()).step_by(stride).collect();
    if nodes.last() != Some(&grid.steps()) {
        nodes.push(grid.steps());
    }
    for i in nodes {
        for (c, v) in path.at(i).iter().enumerate() {
            rows.push(Row::value(format!("X{c}[{i}]"), *v));
        }
    }
    Ok((setup.context(cfg, 1), rows))
}

fn girsanov_check(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 10_000)?;
    setup.require_paths(2)?;
    let t = setup.t_index;
    let samples = weighted_samples(&setup.kernel, &setup.x, &setup.grid, t, t, setup.n_paths, setup.seed)?;
    let diag = weight_diagnostics(&samples)?;
    let ess_min: f64 = cfg.get("ess_min", 0.5)?;
    let rows = vec![
        Row::value("mean_weight", diag.mean_weight)
            .with_se(diag.mean_weight_se)
            .check(diag.martingale_mean_ok(setup.z)),
        Row::value("weight_variance", diag.weight_variance),
        Row::value("ess", diag.effective_sample_size),
        Row::value("ess_fraction", diag.ess_fraction()).check(diag.ess_fraction() >= ess_min),
    ];
    Ok((setup.context(cfg, setup.n_paths), rows))
}

fn oracle_compare(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 10_000)?;
    setup.require_paths(2)?;
    let phis = phis(cfg, "id")?;
    let t = setup.t_index;
    let states = euler_states(&setup.kernel, &setup.x, t, &setup.grid, setup.n_paths, setup.seed)?;
    let samples = weighted_samples(
        &setup.kernel,
        &setup.x,
        &setup.grid,
        t,
        t,
        setup.n_paths,
        independent_seed(setup.seed),
    )?;
    let mut rows = Vec::new();
    for phi in phis {
        let euler = estimate_states(&states, &phi);
        let weak = estimate_weighted(&samples, &phi);
        rows.push(Row::value(format!("euler[{phi}]"), euler.mean).with_se(euler.std_error));
        rows.push(Row::value(format!("girsanov[{phi}]"), weak.mean).with_se(weak.std_error));
        rows.push(
            Row::value(format!("diff[{phi}]"), euler.mean - weak.mean)
                .with_se(euler.combined_se(&weak))
                .check(euler.agrees_with(&weak, setup.z)),
        );
    }
    Ok((setup.context(cfg, setup.n_paths), rows))
}

/// Flow derivative against a common-noise central difference in `x`.
fn derivative_check(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 100)?;
    setup.require_paths(1)?;
    let h: f64 = cfg.get("h", 1e-4)?;
    let rel_tol: f64 = cfg.get("rel_tol", 1e-3)?;
    let fraction_min: f64 = cfg.get("fraction_min", 0.95)?;
    if !(h > 0.0) {
        return Err(CliError::Config("`h` must be positive".into()));
    }
    let (grid, d, t) = (&setup.grid, setup.dim, setup.t_index);
    let solver = DerivativeSolver::new(&setup.kernel, grid)?;
    let euler = EulerSolver::new(&setup.kernel, grid)?;
    let mut errors = map_paths(setup.n_paths, |p| {
        let noise = sample_brownian(grid, d, setup.seed, p)?;
        let path = euler.solve(&setup.x, &noise)?;
        let flow = solver.malliavin_at(&path, 0, t)?;
        let mut fd = vec![0.0; d * d];
        for k in 0..d {
            let mut up = setup.x.clone();
            let mut down = setup.x.clone();
            up[k] += h;
            down[k] -= h;
            let (a, b) = (euler.solve(&up, &noise)?, euler.solve(&down, &noise)?);
            for c in 0..d {
                fd[c * d + k] = (a.at(t)[c] - b.at(t)[c]) / (2.0 * h);
            }
        }
        let diff: Vec<f64> = flow.iter().zip(&fd).map(|(a, b)| a - b).collect();
        Ok(frobenius(&diff) / frobenius(&flow).max(f64::MIN_POSITIVE))
    })?;
    let within = errors.iter().filter(|e| **e <= rel_tol).count() as f64 / errors.len() as f64;
    errors.sort_by(f64::total_cmp);
    let quantile = |q: f64| errors[((q * (errors.len() - 1) as f64).round() as usize).min(errors.len() - 1)];
    let rows = vec![
        Row::value("rel_error_median", quantile(0.5)),
        Row::value("rel_error_q95", quantile(0.95)),
        Row::value("rel_error_max", quantile(1.0)),
        Row::value("fraction_within_tol", within).check(within >= fraction_min),
    ];
    Ok((setup.context(cfg, setup.n_paths), rows))
}

/// Residuals of the Cauchy identity across grid refinements.
fn cauchy(cfg: &ExperimentConfig) -> Output {
    let horizon: f64 = cfg.get("T", 1.0)?;
    let steps: usize = cfg.get("N", 1000)?;
    let levels: Vec<usize> = cfg.list("levels")?.unwrap_or_else(|| vec![steps, 2 * steps, 4 * steps]);
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("`levels` must be increasing step counts".into()));
    }
    let k: usize = cfg.get("k", 2)?;
    let seed: u64 = cfg.get("seed", 0)?;
    let f = cfg.str_or("f", "s").to_string();
    let expected: f64 = cfg.get("expected_order", 1.0)?;
    let order_tol: f64 = cfg.get("order_tol", 0.3)?;
    let residual_max: Option<f64> = cfg.parsed("residual_max")?;

    let finest = *levels.last().expect("non-empty");
    let brownian = if f == "brownian" {
        if levels.iter().any(|n| !finest.is_multiple_of(*n)) {
            return Err(CliError::Config(
                "with f = brownian every level must divide the finest".into(),
            ));
        }
        Some(sample_brownian(&make_grid(horizon, finest)?, 1, seed, 0)?)
    } else {
        None
    };
    let power: Option<i32> = match f.as_str() {
        "one" => Some(0),
        "s" => Some(1),
        "brownian" => None,
        other => match other.strip_prefix("s^").and_then(|p| p.parse().ok()) {
            Some(p) => Some(p),
            None => return Err(CliError::Config(format!("unknown f `{other}` (one, s, s^p, brownian)"))),
        },
    };

    let mut residuals = Vec::new();
    for &n in &levels {
        let grid = make_grid(horizon, n)?;
        let samples = match (&brownian, power) {
            (Some(b), _) => {
                let stride = finest / n;
                GridFunction::from_scalar(&grid, |t| {
                    let i = (t / grid.dt()).round() as usize;
                    b.at(i * stride)[0].cos()
                })
            }
            (None, Some(p)) => GridFunction::from_scalar(&grid, |t| t.powi(p)),
            (None, None) => unreachable!("brownian handled above"),
        };
        residuals.push(cauchy_check(&samples, k));
    }

    let mut rows = Vec::new();
    for (&n, &r) in levels.iter().zip(&residuals) {
        let row = Row::value(format!("residual[N={n}]"), r);
        rows.push(match residual_max {
            Some(m) => row.check(r <= m),
            None => row,
        });
    }
    for i in 1..levels.len() {
        let (r0, r1) = (residuals[i - 1], residuals[i]);
        let exact = r0 <= 1e-12 && r1 <= 1e-12;
        let order = (r0 / r1).ln() / (levels[i] as f64 / levels[i - 1] as f64).ln();
        let pass = exact || (order - expected).abs() <= order_tol;
        rows.push(Row::value(format!("order[{}->{}]", levels[i - 1], levels[i]), order).check(pass));
    }
    let ctx = RunContext {
        command: cfg.command.to_string(),
        kernel: format!("f={f};k={k}"),
        horizon,
        steps: levels[0],
        dim: 1,
        n_paths: usize::from(brownian.is_some()),
        seed,
    };
    Ok((ctx, rows))
}

fn mollify_study(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 10_000)?;
    setup.require_paths(2)?;
    let levels: Vec<u32> = cfg.list("levels")?.unwrap_or_else(|| vec![4, 16, 64]);
    let quad_points: usize = cfg.get("quad_points", 32)?;
    let phi = phis(cfg, "bounded_id")?;
    let [phi] = phi.as_slice() else {
        return Err(CliError::Config("mollify-study takes a single `phi`".into()));
    };
    let kernels = levels
        .iter()
        .map(|&n| Ok((n, mollify_kernel(&setup.kernel, n, quad_points, setup.dim)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = weak_convergence_study(
        &kernels,
        &setup.kernel,
        &setup.x,
        phi,
        setup.t_index,
        &setup.grid,
        setup.n_paths,
        setup.seed,
    )?;
    let mut rows: Vec<Row> = table
        .rows
        .iter()
        .map(|r| Row::value(format!("estimate[n={}]", r.level), r.estimate.mean).with_se(r.estimate.std_error))
        .collect();
    let reference = table.reference;
    rows.push(Row::value("reference", reference.mean).with_se(reference.std_error));
    if let (Some(first), Some(last)) = (table.rows.first(), table.rows.last()) {
        let gap = |e: &Estimate| (e.mean - reference.mean).abs();
        rows.push(
            Row::value("trend", gap(&last.estimate) - gap(&first.estimate))
                .with_se(last.estimate.combined_se(&reference))
                .check(table.trend_toward_reference(setup.z)),
        );
        rows.push(
            Row::value("finest_minus_reference", last.estimate.mean - reference.mean)
                .with_se(last.estimate.combined_se(&reference))
                .check(table.finest_matches_reference(setup.z)),
        );
    }
    Ok((setup.context(cfg, setup.n_paths), rows))
}

/// Hölder regularity of `u -> D_u X_t` from pairs `(N 2^-e, 0)`.
fn holder_study(cfg: &ExperimentConfig) -> Output {
    let setup = Setup::new(cfg, 10_000)?;
    setup.require_paths(2)?;
    let exponents: Vec<u32> = cfg.list("pair_exponents")?.unwrap_or_else(|| vec![2, 3, 4, 5, 6]);
    let resamples: usize = cfg.get("bootstrap", 200)?;
    let confidence: f64 = cfg.get("confidence", 0.95)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Config("`confidence` must lie in (0, 1)".into()));
    }
    let steps = setup.grid.steps();
    let mut pairs = Vec::new();
    for &e in &exponents {
        let r = (steps as f64 * 0.5f64.powi(e as i32)).round() as usize;
        if r == 0 {
            return Err(CliError::Config(format!(
                "N = {steps} is too coarse for separation 2^-{e} T"
            )));
        }
        pairs.push((r, 0));
    }
    let stat = holder_statistic(
        &setup.kernel,
        &setup.x,
        &setup.grid,
        setup.n_paths,
        setup.seed,
        &pairs,
        setup.t_index,
    )?;
    let mut rows: Vec<Row> = exponents
        .iter()
        .zip(&stat.l2_differences)
        .map(|(e, l2)| Row::value(format!("l2[2^-{e}]"), l2.mean).with_se(l2.std_error))
        .collect();
    let boot_seed = independent_seed(setup.seed);
    rows.push(Row::value("zero_difference", f64::from(u8::from(stat.zero_difference))));
    rows.push(match stat.slope {
        Some(s) => Row::value("slope", s).with_se(stat.bootstrap_std_error(resamples, boot_seed).unwrap_or(f64::NAN)),
        None => Row::value("slope", f64::NAN),
    });
    let lower = stat.bootstrap_lower_bound(resamples, 1.0 - confidence, boot_seed);
    rows.push(Row::value("bootstrap_lower", lower.unwrap_or(f64::NAN)).check(lower.is_some_and(|l| l > 0.0)));
    Ok((setup.context(cfg, setup.n_paths), rows))
}
