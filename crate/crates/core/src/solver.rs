//! Pathwise solvers for `X_t = x + int_0^t b(t, s, X_s) ds + B_t`.

use crate::error::{invalid, Result, SvdeError};
use crate::grid::{BrownianPath, TimeGrid};
use crate::kernel::KernelSeries;
use crate::volterra::VolterraPlan;

/// Solution values on a grid, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    grid: TimeGrid,
    dim: usize,
    initial: Vec<f64>,
    values: Vec<f64>,
}

impl SolutionPath {
    /// The drift-free path `x + B`.
    pub fn drift_free(x: &[f64], noise: &BrownianPath) -> Result<Self> {
        if x.len() != noise.dim() {
            return Err(SvdeError::DimensionMismatch {
                expected: noise.dim(),
                actual: x.len(),
            });
        }
        let d = x.len();
        let values = noise.values().iter().enumerate().map(|(k, b)| x[k % d] + b).collect();
        Ok(Self {
            grid: *noise.grid(),
            dim: d,
            initial: x.to_vec(),
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.grid.steps())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_inputs(kernel: &KernelSeries, x: &[f64], noise: &BrownianPath, grid: &TimeGrid) -> Result<()> {
    if noise.grid() != grid {
        return Err(SvdeError::GridMismatch);
    }
    if x.len() != noise.dim() {
        return Err(SvdeError::DimensionMismatch {
            expected: noise.dim(),
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x", "initial value must be finite"));
    }
    kernel.check_dim(x.len())?;
    check_horizon(kernel, grid)
}

pub(crate) fn check_horizon(kernel: &KernelSeries, grid: &TimeGrid) -> Result<()> {
    if grid.horizon() > kernel.horizon() * (1.0 + 1e-12) {
        return Err(SvdeError::OutsideHorizon {
            t: grid.horizon(),
            horizon: kernel.horizon(),
        });
    }
    Ok(())
}

/// Explicit Euler scheme with the accelerated drift sum, reusable across paths.
#[derive(Debug, Clone)]
pub struct EulerSolver<'k> {
    plan: VolterraPlan<'k>,
}

impl<'k> EulerSolver<'k> {
    pub fn new(kernel: &'k KernelSeries, grid: &TimeGrid) -> Result<Self> {
        check_horizon(kernel, grid)?;
        Ok(Self {
            plan: VolterraPlan::new(kernel, grid),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.plan.grid()
    }

    pub fn kernel(&self) -> &'k KernelSeries {
        self.plan.kernel()
    }

    pub(crate) fn plan(&self) -> &VolterraPlan<'k> {
        &self.plan
    }

    /// `X(i+1) = x + sum_{j<=i} b(t_{i+1}, t_j, X(j)) dt + B(i+1)`.
    pub fn solve(&self, x: &[f64], noise: &BrownianPath) -> Result<SolutionPath> {
        let grid = *self.plan.grid();
        check_inputs(self.plan.kernel(), x, noise, &grid)?;
        let d = x.len();
        let mut values = vec![0.0; grid.len() * d];
        values[..d].copy_from_slice(x);
        let mut acc = self.plan.sum(d);
        let mut drift = vec![0.0; d];
        for i in 0..grid.steps() {
            acc.push_state(&values[i * d..(i + 1) * d]);
            acc.query(i + 1, &mut drift);
            let b = noise.at(i + 1);
            for c in 0..d {
                let v = x[c] + drift[c] + b[c];
                if !v.is_finite() {
                    return Err(SvdeError::NonFinite { index: i + 1 });
                }
                values[(i + 1) * d + c] = v;
            }
        }
        Ok(SolutionPath {
            grid,
            dim: d,
            initial: x.to_vec(),
            values,
        })
    }
}

/// Euler solution with the `O(N M^2)` drift accumulation.
pub fn solve_euler(kernel: &KernelSeries, x: &[f64], noise: &BrownianPath, grid: &TimeGrid) -> Result<SolutionPath> {
    EulerSolver::new(kernel, grid)?.solve(x, noise)
}

/// Noise switched off: `X = x + int b ds`.
pub fn solve_deterministic(kernel: &KernelSeries, x: &[f64], grid: &TimeGrid) -> Result<SolutionPath> {
    solve_euler(kernel, x, &BrownianPath::zero(grid, x.len())?, grid)
}

/// Reference Euler solution that re-evaluates the full drift sum at every step, `O(N^2 M)`.
pub fn solve_euler_naive(
    kernel: &KernelSeries,
    x: &[f64],
    noise: &BrownianPath,
    grid: &TimeGrid,
) -> Result<SolutionPath> {
    check_inputs(kernel, x, noise, grid)?;
    let d = x.len();
    let dt = grid.dt();
    let mut values = vec![0.0; grid.len() * d];
    values[..d].copy_from_slice(x);
    let mut tmp = vec![0.0; d];
    for i in 0..grid.steps() {
        let t = grid.node(i + 1);
        let mut drift = vec![0.0; d];
        for j in 0..=i {
            let s = grid.node(j);
            kernel.eval_into(t - s, s, &values[j * d..(j + 1) * d], &mut tmp);
            for c in 0..d {
                drift[c] += tmp[c] * dt;
            }
        }
        let b = noise.at(i + 1);
        for c in 0..d {
            values[(i + 1) * d + c] = x[c] + drift[c] + b[c];
        }
    }
    Ok(SolutionPath {
        grid: *grid,
        dim: d,
        initial: x.to_vec(),
        values,
    })
}

/// Fixed point reached by [`picard_solve`].
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub path: SolutionPath,
    pub iterations: usize,
    pub last_change: f64,
}

/// Picard iteration `X^{k+1}(i) = x + sum_{j<i} b(t_i, t_j, X^k(j)) dt + B(i)`
/// started from `x + B`, stopped once the sup-norm change is at most `tol`.
pub fn picard_solve(
    kernel: &KernelSeries,
    x: &[f64],
    noise: &BrownianPath,
    grid: &TimeGrid,
    max_iters: usize,
    tol: f64,
) -> Result<PicardSolution> {
    check_inputs(kernel, x, noise, grid)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "tolerance must be positive"));
    }
    if max_iters == 0 {
        return Err(invalid("max_iters", "at least one iteration is required"));
    }
    let plan = VolterraPlan::new(kernel, grid);
    let d = x.len();
    let mut current = SolutionPath::drift_free(x, noise)?;
    let mut next = vec![0.0; grid.len() * d];
    let mut drift = vec![0.0; d];
    let mut last_change = f64::INFINITY;
    for iteration in 1..=max_iters {
        let mut acc = plan.sum(d);
        let mut change = 0.0f64;
        for i in 0..grid.len() {
            acc.query(i, &mut drift);
            let b = noise.at(i);
            for c in 0..d {
                let v = x[c] + drift[c] + b[c];
                change = change.max((v - current.values[i * d + c]).abs());
                next[i * d + c] = v;
            }
            acc.push_state(current.at(i));
        }
        std::mem::swap(&mut current.values, &mut next);
        if !change.is_finite() {
            break;
        }
        last_change = change;
        if change <= tol {
            return Ok(PicardSolution {
                path: current,
                iterations: iteration,
                last_change,
            });
        }
    }
    Err(SvdeError::PicardNotConverged {
        iterations: max_iters,
        last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, sample_brownian};
    use crate::kernel::{Constant, Cosine, FnField, Linear};

    #[test]
    fn empty_kernel_gives_x_plus_b() {
        let g = make_grid(1.0, 20).unwrap();
        let b = sample_brownian(&g, 2, 1, 0).unwrap();
        let k = KernelSeries::new(1.0).unwrap();
        let x = [0.5, -1.0];
        let sol = solve_euler(&k, &x, &b, &g).unwrap();
        assert_eq!(sol, SolutionPath::drift_free(&x, &b).unwrap());
    }

    #[test]
    fn constant_drift_is_linear_in_time() {
        let g = make_grid(2.0, 8).unwrap();
        let k = KernelSeries::new(2.0)
            .unwrap()
            .with_term(0, Constant::field(vec![0.75]))
            .unwrap();
        let sol = solve_deterministic(&k, &[1.0], &g).unwrap();
        for i in 0..=8 {
            assert!((sol.at(i)[0] - (1.0 + 0.75 * g.node(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn single_step_grid() {
        let g = make_grid(0.5, 1).unwrap();
        let k = KernelSeries::new(0.5)
            .unwrap()
            .with_term(0, Constant::field(vec![2.0]))
            .unwrap();
        let sol = solve_deterministic(&k, &[0.0], &g).unwrap();
        assert_eq!(sol.values(), &[0.0, 1.0]);
    }

    #[test]
    fn exponential_and_cosh_oracles() {
        let g = make_grid(1.0, 10_000).unwrap();
        let exp_k = KernelSeries::new(1.0)
            .unwrap()
            .with_term(0, Linear::field(1.0))
            .unwrap();
        let e = solve_deterministic(&exp_k, &[1.0], &g).unwrap().terminal()[0];
        assert!((e - std::f64::consts::E).abs() < 1e-3);

        let cosh_k = KernelSeries::new(1.0)
            .unwrap()
            .with_term(1, Linear::field(1.0))
            .unwrap();
        let c = solve_deterministic(&cosh_k, &[1.0], &g).unwrap().terminal()[0];
        assert!((c - 1f64.cosh()).abs() < 5e-4);
    }

    #[test]
    fn dimension_and_grid_mismatch() {
        let g = make_grid(1.0, 10).unwrap();
        let b = sample_brownian(&g, 2, 1, 0).unwrap();
        let k = KernelSeries::new(1.0).unwrap();
        assert!(matches!(
            solve_euler(&k, &[0.0], &b, &g),
            Err(SvdeError::DimensionMismatch { .. })
        ));
        let other = make_grid(1.0, 11).unwrap();
        assert!(matches!(
            solve_euler(&k, &[0.0, 0.0], &b, &other),
            Err(SvdeError::GridMismatch)
        ));
        let k2 = KernelSeries::new(1.0)
            .unwrap()
            .with_term(0, Constant::field(vec![1.0, 1.0, 1.0]))
            .unwrap();
        assert!(solve_euler(&k2, &[0.0, 0.0], &b, &g).is_err());
        let short = KernelSeries::new(0.5).unwrap();
        assert!(matches!(
            solve_euler(&short, &[0.0, 0.0], &b, &g),
            Err(SvdeError::OutsideHorizon { .. })
        ));
    }

    #[test]
    fn picard_fixed_point_equals_euler() {
        let g = make_grid(0.5, 200).unwrap();
        let b = sample_brownian(&g, 1, 3, 9).unwrap();
        let k = KernelSeries::from_terms(0.5, [(0, Cosine::field(1.0)), (1, Cosine::field(0.5))]).unwrap();
        let euler = solve_euler(&k, &[0.2], &b, &g).unwrap();
        let picard = picard_solve(&k, &[0.2], &b, &g, 100, 1e-13).unwrap();
        for (a, p) in euler.values().iter().zip(picard.path.values()) {
            assert!((a - p).abs() < 1e-11);
        }
    }

    #[test]
    fn picard_trivial_and_divergent_cases() {
        let g = make_grid(1.0, 50).unwrap();
        let b = sample_brownian(&g, 1, 3, 1).unwrap();
        let empty = KernelSeries::new(1.0).unwrap();
        let sol = picard_solve(&empty, &[1.0], &b, &g, 5, 1e-12).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.path, SolutionPath::drift_free(&[1.0], &b).unwrap());

        let stiff = KernelSeries::new(1.0)
            .unwrap()
            .with_term(0, Linear::field(40.0))
            .unwrap();
        match picard_solve(&stiff, &[1.0], &b, &g, 3, 1e-12) {
            Err(SvdeError::PicardNotConverged {
                iterations,
                last_change,
            }) => {
                assert_eq!(iterations, 3);
                assert!(last_change > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn adaptedness_under_future_perturbation() {
        let g = make_grid(1.0, 64).unwrap();
        let k = KernelSeries::from_terms(
            1.0,
            [
                (0, Cosine::field(1.0)),
                (2, FnField::new("tanh", 1.0, |_, x, o| o[0] = x[0].tanh()).into_field()),
            ],
        )
        .unwrap();
        let base = sample_brownian(&g, 1, 5, 0).unwrap();
        let mut inc: Vec<f64> = (0..64).map(|i| base.increment(i, 0)).collect();
        let x1 = solve_euler(&k, &[0.3], &base, &g).unwrap();
        for v in inc.iter_mut().skip(40) {
            *v += 0.7;
        }
        let perturbed = BrownianPath::from_increments(&g, 1, &inc).unwrap();
        let x2 = solve_euler(&k, &[0.3], &perturbed, &g).unwrap();
        assert_eq!(&x1.values()[..=40], &x2.values()[..=40]);
        assert_ne!(x1.values()[41], x2.values()[41]);
    }
}
