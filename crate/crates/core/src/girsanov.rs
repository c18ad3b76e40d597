//! Weak solutions by change of measure.
//!
//! Repeated integration collapses the two-time drift into a one-time process
//! `C(t) = sum_m m! I^m[g_m(., W)](t)` whose running integral reproduces
//! `int_0^t b(t, s, W_s) ds`. Reweighting a drift-free path `W = x + B` by the
//! stochastic exponential of `int <C, dB>` then yields expectations under the
//! law of the solution without ever solving the Volterra equation.

use log::warn;

use crate::error::{Result, SvdeError};
use crate::grid::{sample_brownian, BrownianPath, TimeGrid};
use crate::kernel::{GridFunction, KernelSeries};
use crate::montecarlo::{map_paths, require_paths, Estimate};
use crate::phi::TestFunction;
use crate::solver::{check_horizon, SolutionPath};

/// Collapsed drift `C(t_i)` along one state path.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFunctional {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl DriftFunctional {
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Left-point running integral `int_0^{t_i} C ds`.
    pub fn running_integral(&self) -> GridFunction {
        let dt = self.grid.dt();
        let d = self.dim;
        let mut out = vec![0.0; self.values.len()];
        for i in 1..self.grid.len() {
            for c in 0..d {
                out[i * d + c] = out[(i - 1) * d + c] + self.values[(i - 1) * d + c] * dt;
            }
        }
        GridFunction::new(&self.grid, d, out).expect("shape preserved")
    }
}

/// Precomputation for evaluating `C` on many paths of one grid.
#[derive(Debug, Clone)]
pub struct DriftFunctionalPlan<'k> {
    kernel: &'k KernelSeries,
    grid: TimeGrid,
    factorials: Vec<f64>,
    // lag weights of the collapsed functional for polynomial-profile kernels:
    // [p(dt), p(2 dt) - p(dt), p(3 dt) - p(2 dt), ...]
    lag_weights: Option<Vec<f64>>,
}

impl<'k> DriftFunctionalPlan<'k> {
    pub fn new(kernel: &'k KernelSeries, grid: &TimeGrid) -> Result<Self> {
        check_horizon(kernel, grid)?;
        let factorials = kernel
            .terms()
            .iter()
            .map(|t| (1..=t.exponent).fold(1.0, |a, k| a * k as f64))
            .collect();
        // For b = p(t - s) g(s, x) the collapsed functional is the derivative
        // in t of int_0^t p(t - s) g(s, W_s) ds. Taking it as the forward
        // difference of the left-point sum avoids the cancellation of the
        // monomial expansion and reproduces the Euler drift increments exactly.
        let lag_weights = kernel.profile().map(|p| {
            let dt = grid.dt();
            let at: Vec<f64> = (0..=grid.steps() + 1)
                .map(|l| p.polynomial.evaluate(l as f64 * dt))
                .collect();
            std::iter::once(at[1])
                .chain((1..=grid.steps()).map(|l| at[l + 1] - at[l]))
                .collect()
        });
        Ok(Self {
            kernel,
            grid: *grid,
            factorials,
            lag_weights,
        })
    }

    /// `C(t_i)` for `i <= upto` along `state`.
    pub fn evaluate(&self, state: &SolutionPath, upto: usize) -> Result<DriftFunctional> {
        if state.grid() != &self.grid {
            return Err(SvdeError::GridMismatch);
        }
        self.kernel.check_dim(state.dim())?;
        let d = state.dim();
        let dt = self.grid.dt();
        let mut values = vec![0.0; self.grid.len() * d];
        let mut scratch = vec![0.0; d];

        if let (Some(w), Some(profile)) = (&self.lag_weights, self.kernel.profile()) {
            let mut history = Vec::with_capacity((upto + 1) * d);
            for i in 0..=upto {
                profile.field.evaluate(self.grid.node(i), state.at(i), &mut scratch);
                history.extend_from_slice(&scratch);
                let out = &mut values[i * d..(i + 1) * d];
                for j in 0..=i {
                    let wt = w[i - j];
                    for (o, g) in out.iter_mut().zip(&history[j * d..(j + 1) * d]) {
                        *o += wt * g;
                    }
                }
            }
        } else {
            // levels[term][k] = I^k[g_m](t_i), k = 0..=m
            let mut levels: Vec<Vec<Vec<f64>>> = self
                .kernel
                .terms()
                .iter()
                .map(|t| vec![vec![0.0; d]; t.exponent as usize + 1])
                .collect();
            for i in 0..=upto {
                let s = self.grid.node(i);
                let out = &mut values[i * d..(i + 1) * d];
                for ((term, lv), fact) in self.kernel.terms().iter().zip(levels.iter_mut()).zip(&self.factorials) {
                    let m = term.exponent as usize;
                    for k in (1..=m).rev() {
                        let (lower, upper) = lv.split_at_mut(k);
                        for (u, l) in upper[0].iter_mut().zip(&lower[k - 1]) {
                            *u += l * dt;
                        }
                    }
                    term.field.evaluate(s, state.at(i), &mut lv[0]);
                    for (o, v) in out.iter_mut().zip(&lv[m]) {
                        *o += fact * v;
                    }
                }
            }
        }
        Ok(DriftFunctional {
            grid: self.grid,
            dim: d,
            values,
        })
    }
}

/// `C(t_i) = sum_m m! I^m[g_m(., W)](t_i)` along the state path `W`.
pub fn drift_functional(kernel: &KernelSeries, state: &SolutionPath) -> Result<DriftFunctional> {
    DriftFunctionalPlan::new(kernel, state.grid())?.evaluate(state, state.grid().steps())
}

/// Direct left-point quadrature `sum_{j<i} b(t_i, t_j, W_j) dt` of the two-time drift.
pub fn direct_drift_integral(kernel: &KernelSeries, state: &SolutionPath) -> Result<GridFunction> {
    let grid = state.grid();
    check_horizon(kernel, grid)?;
    kernel.check_dim(state.dim())?;
    let d = state.dim();
    let dt = grid.dt();
    let mut out = vec![0.0; grid.len() * d];
    let mut tmp = vec![0.0; d];
    for i in 1..grid.len() {
        let t = grid.node(i);
        for j in 0..i {
            let s = grid.node(j);
            kernel.eval_into(t - s, s, state.at(j), &mut tmp);
            for c in 0..d {
                out[i * d + c] += tmp[c] * dt;
            }
        }
    }
    GridFunction::new(grid, d, out)
}

/// Max node residual between `int C ds` and the direct two-time quadrature.
pub fn reconstruction_residual(kernel: &KernelSeries, state: &SolutionPath) -> Result<f64> {
    let collapsed = drift_functional(kernel, state)?.running_integral();
    let direct = direct_drift_integral(kernel, state)?;
    Ok(collapsed
        .values()
        .iter()
        .zip(direct.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// `sum_{i<upto} <C(i), B(i+1) - B(i)> - 1/2 sum_{i<upto} |C(i)|^2 dt`.
pub fn log_weight_until(functional: &DriftFunctional, noise: &BrownianPath, upto: usize) -> Result<f64> {
    if functional.grid() != noise.grid() {
        return Err(SvdeError::GridMismatch);
    }
    if functional.dim() != noise.dim() {
        return Err(SvdeError::DimensionMismatch {
            expected: noise.dim(),
            actual: functional.dim(),
        });
    }
    noise.grid().check_index(upto)?;
    let dt = noise.grid().dt();
    let mut ito = 0.0;
    let mut quad = 0.0;
    for i in 0..upto {
        for (c, v) in functional.at(i).iter().enumerate() {
            ito += v * noise.increment(i, c);
            quad += v * v;
        }
    }
    Ok(ito - 0.5 * quad * dt)
}

/// Log of the stochastic exponential over the whole grid.
pub fn log_weight(functional: &DriftFunctional, noise: &BrownianPath) -> Result<f64> {
    log_weight_until(functional, noise, noise.grid().steps())
}

/// State `x + B(t)` of a drift-free path together with its log-weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub terminal_state: Vec<f64>,
    pub log_weight: f64,
    pub path_index: u64,
}

impl WeightedSample {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Weighted samples: state read at `state_index`, weight accumulated over
/// `[0, t_{weight_index}]`.
pub fn weighted_samples(
    kernel: &KernelSeries,
    x: &[f64],
    grid: &TimeGrid,
    state_index: usize,
    weight_index: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<WeightedSample>> {
    grid.check_index(state_index)?;
    grid.check_index(weight_index)?;
    kernel.check_dim(x.len())?;
    let plan = DriftFunctionalPlan::new(kernel, grid)?;
    map_paths(n_paths, |p| {
        let noise = sample_brownian(grid, x.len(), seed, p)?;
        let state = SolutionPath::drift_free(x, &noise)?;
        let functional = plan.evaluate(&state, weight_index)?;
        let lw = log_weight_until(&functional, &noise, weight_index)?;
        if !lw.is_finite() {
            return Err(SvdeError::NonFinite { index: weight_index });
        }
        Ok(WeightedSample {
            terminal_state: state.at(state_index).to_vec(),
            log_weight: lw,
            path_index: p,
        })
    })
}

/// Mean and standard error of `phi(state) * weight`, reduced in path order.
pub fn estimate_weighted(samples: &[WeightedSample], phi: &TestFunction) -> Estimate {
    let v: Vec<f64> = samples
        .iter()
        .map(|s| phi.eval(&s.terminal_state) * s.weight())
        .collect();
    Estimate::from_samples(&v)
}

/// Degeneracy diagnostics of a set of importance weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    pub mean_weight: f64,
    pub mean_weight_se: f64,
    pub weight_variance: f64,
    pub effective_sample_size: f64,
    pub n: usize,
}

impl WeightDiagnostics {
    pub fn ess_fraction(&self) -> f64 {
        self.effective_sample_size / self.n as f64
    }

    /// Mean weight within `z` standard errors of one.
    pub fn martingale_mean_ok(&self, z: f64) -> bool {
        (self.mean_weight - 1.0).abs() <= z * self.mean_weight_se
    }
}

/// ESS below this fraction of the sample count triggers a warning.
pub const ESS_WARNING_FRACTION: f64 = 0.1;

pub fn weight_diagnostics(samples: &[WeightedSample]) -> Result<WeightDiagnostics> {
    if samples.is_empty() {
        return Err(SvdeError::Insufficient(
            "weight diagnostics need at least one sample".into(),
        ));
    }
    let weights: Vec<f64> = samples.iter().map(WeightedSample::weight).collect();
    let est = Estimate::from_samples(&weights);
    let n = weights.len();
    let variance = if n > 1 {
        est.std_error * est.std_error * n as f64
    } else {
        0.0
    };
    // ESS is scale free; shift logs by their max to avoid overflow.
    let max_lw = samples.iter().map(|s| s.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let (sum, sum_sq) = samples.iter().fold((0.0, 0.0), |(a, b), s| {
        let w = (s.log_weight - max_lw).exp();
        (a + w, b + w * w)
    });
    let ess = sum * sum / sum_sq;
    if ess < ESS_WARNING_FRACTION * n as f64 {
        warn!(
            "effective sample size {ess:.1} is below {:.0}% of {n} paths",
            ESS_WARNING_FRACTION * 100.0
        );
    }
    Ok(WeightDiagnostics {
        mean_weight: est.mean,
        mean_weight_se: est.std_error,
        weight_variance: variance,
        effective_sample_size: ess,
        n,
    })
}

/// Output of [`weak_estimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakEstimate {
    pub estimate: Estimate,
    pub diagnostics: WeightDiagnostics,
}

/// `E[phi(X_t)]` estimated as `E[phi(x + B_t) exp(log_weight_t)]`.
pub fn weak_estimator(
    kernel: &KernelSeries,
    x: &[f64],
    phi: &TestFunction,
    t_index: usize,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<WeakEstimate> {
    require_paths(n_paths, 2)?;
    let samples = weighted_samples(kernel, x, grid, t_index, t_index, n_paths, seed)?;
    Ok(WeakEstimate {
        estimate: estimate_weighted(&samples, phi),
        diagnostics: weight_diagnostics(&samples)?,
    })
}
