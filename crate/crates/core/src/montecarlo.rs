//! Deterministic Monte Carlo plumbing.
//!
//! Paths are generated in parallel but collected in `path_index` order and
//! reduced sequentially, so estimates do not depend on the worker count.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{sample_brownian, TimeGrid};
use crate::kernel::KernelSeries;
use crate::phi::TestFunction;
use crate::solver::EulerSolver;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean and `sqrt(var / n)` with the unbiased sample variance.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, n }
    }

    /// A value known without sampling error.
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            std_error: 0.0,
            n: 0,
        }
    }

    /// `sqrt(se_1^2 + se_2^2)`.
    pub fn combined_se(&self, other: &Self) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// `|mean_1 - mean_2| <= z * combined_se`.
    pub fn agrees_with(&self, other: &Self, z: f64) -> bool {
        (self.mean - other.mean).abs() <= z * self.combined_se(other)
    }

    /// `|mean - value| <= z * se`.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.std_error
    }
}

/// Evaluates `f(path_index)` for every path and returns results in index order.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Runs `f` on a dedicated pool with `threads` workers (0 = rayon default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub(crate) fn require_paths(n_paths: usize, min: usize) -> Result<()> {
    if n_paths < min {
        return Err(invalid(
            "n_paths",
            format!("at least {min} paths are required, got {n_paths}"),
        ));
    }
    Ok(())
}

/// `X(t_index)` of the Euler solution for paths `0..n_paths`.
pub fn euler_states(
    kernel: &KernelSeries,
    x: &[f64],
    t_index: usize,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    grid.check_index(t_index)?;
    let solver = EulerSolver::new(kernel, grid)?;
    map_paths(n_paths, |p| {
        let noise = sample_brownian(grid, x.len(), seed, p)?;
        Ok(solver.solve(x, &noise)?.at(t_index).to_vec())
    })
}

/// Plain Monte Carlo estimate of `E[phi(X_t)]` over Euler paths.
pub fn euler_estimator(
    kernel: &KernelSeries,
    x: &[f64],
    phi: &TestFunction,
    t_index: usize,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    require_paths(n_paths, 2)?;
    let states = euler_states(kernel, x, t_index, grid, n_paths, seed)?;
    Ok(estimate_states(&states, phi))
}

pub fn estimate_states(states: &[Vec<f64>], phi: &TestFunction) -> Estimate {
    let v: Vec<f64> = states.iter().map(|s| phi.eval(s)).collect();
    Estimate::from_samples(&v)
}

/// Seed of the stream used for reference estimators that must be independent
/// of the primary estimator run with `seed`.
pub fn independent_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.covers(2.5, 0.0));
        let single = Estimate::from_samples(&[7.0]);
        assert_eq!(single.std_error, 0.0);
    }

    #[test]
    fn brownian_terminal_moments() {
        let g = make_grid(1.0, 4).unwrap();
        let k = KernelSeries::new(1.0).unwrap();
        let n = 100_000;
        let states = euler_states(&k, &[0.0, 0.0], 4, &g, n, 42).unwrap();
        for c in 0..2 {
            let v: Vec<f64> = states.iter().map(|s| s[c]).collect();
            let e = Estimate::from_samples(&v);
            assert!(e.mean.abs() <= 3.0 * (1.0f64 / n as f64).sqrt());
            let sq: Vec<f64> = v.iter().map(|b| (b - e.mean).powi(2)).collect();
            let var = Estimate::from_samples(&sq);
            assert!(var.covers(1.0, 3.0), "{var:?}");
        }
    }

    #[test]
    fn normalised_increments_are_standard() {
        let g = make_grid(0.5, 10).unwrap();
        let n = 20_000;
        let incs: Vec<f64> = (0..n)
            .map(|p| {
                let b = sample_brownian(&g, 1, 9, p).unwrap();
                b.increment(3, 0) / g.dt().sqrt()
            })
            .collect();
        let e = Estimate::from_samples(&incs);
        assert!(e.covers(0.0, 3.0));
        let sq: Vec<f64> = incs.iter().map(|z| z * z).collect();
        assert!(Estimate::from_samples(&sq).covers(1.0, 3.0));
    }

    #[test]
    fn results_independent_of_thread_count() {
        let g = make_grid(0.5, 50).unwrap();
        let k = KernelSeries::new(0.5)
            .unwrap()
            .with_term(0, crate::kernel::Cosine::field(1.0))
            .unwrap();
        let run = |threads| {
            with_threads(threads, || {
                euler_estimator(&k, &[0.0], &TestFunction::Square, 50, &g, 2000, 1).unwrap()
            })
        };
        assert_eq!(run(1), run(3));
    }
}
