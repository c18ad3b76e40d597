//! Malliavin and flow derivatives of the solution, and the Monte Carlo
//! statistics behind the relative-compactness criterion: `L^2` bounds on the
//! solution and its Malliavin derivative, and the Hölder regularity of
//! `u -> D_u X_t`.
//!
//! Both derivatives solve the same linear Volterra equation
//! `D(t) = I + int_u^t Db(t, s, X_s) D(s) ds`, discretised as
//! `D(t_{i+1}) = I + sum_{u <= j <= i} Db(t_{i+1}, t_j, X_j) D(t_j) dt`.

use rand::Rng;

use crate::error::{invalid, Result, SvdeError};
use crate::grid::{path_rng, sample_brownian, TimeGrid};
use crate::kernel::KernelSeries;
use crate::montecarlo::{map_paths, require_paths, Estimate};
use crate::solver::{EulerSolver, SolutionPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    /// `D_u X_t`, one row per `u`.
    Malliavin,
    /// `dX_t / dx`, the row `u = 0` only.
    Flow,
}

/// Matrices `M(u, t)` for `u <= t`, each row-major `d x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    kind: DerivativeKind,
    grid: TimeGrid,
    dim: usize,
    // rows[u] holds M(u, t) for t = u..=N
    rows: Vec<Vec<f64>>,
}

impl DerivativeField {
    pub fn kind(&self) -> DerivativeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `M(u, t)`, or `None` when `u > t` or the row is not populated.
    pub fn entry(&self, u: usize, t: usize) -> Option<&[f64]> {
        let row = self.rows.get(u)?;
        if t < u || t > self.grid.steps() {
            return None;
        }
        let dd = self.dim * self.dim;
        row.get((t - u) * dd..(t - u + 1) * dd)
    }
}

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for c in 0..d {
        m[c * d + c] = 1.0;
    }
    m
}

/// Frobenius norm.
pub fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solver for the linearised equation, reusable across paths of one grid.
#[derive(Debug, Clone)]
pub struct DerivativeSolver<'k> {
    euler: EulerSolver<'k>,
}

impl<'k> DerivativeSolver<'k> {
    /// Fails if any coefficient field lacks a spatial gradient.
    pub fn new(kernel: &'k KernelSeries, grid: &TimeGrid) -> Result<Self> {
        kernel.require_gradients()?;
        Ok(Self {
            euler: EulerSolver::new(kernel, grid)?,
        })
    }

    pub fn euler(&self) -> &EulerSolver<'k> {
        &self.euler
    }

    /// `D(t)` for `t = u..=upto`, started from `initial` at `t = u`.
    pub fn response(&self, path: &SolutionPath, u: usize, upto: usize, initial: &[f64]) -> Result<Vec<f64>> {
        let grid = self.euler.grid();
        if path.grid() != grid {
            return Err(SvdeError::GridMismatch);
        }
        let d = path.dim();
        self.euler.kernel().check_dim(d)?;
        if initial.len() != d * d {
            return Err(SvdeError::DimensionMismatch {
                expected: d * d,
                actual: initial.len(),
            });
        }
        if u > upto || upto > grid.steps() {
            return Err(invalid("u_index", format!("need u <= t <= N, got u = {u}, t = {upto}")));
        }
        let dd = d * d;
        let mut out = Vec::with_capacity((upto - u + 1) * dd);
        out.extend_from_slice(initial);
        let mut acc = self.euler.plan().sum_from(dd, u);
        let mut jac = vec![0.0; dd];
        let mut sum = vec![0.0; dd];
        for i in u..upto {
            let k = i - u;
            let current = out[k * dd..(k + 1) * dd].to_vec();
            acc.push_linear(path.at(i), &current, &mut jac);
            acc.query(i + 1, &mut sum);
            for (s, m0) in sum.iter_mut().zip(initial) {
                *s += m0;
            }
            if sum.iter().any(|v| !v.is_finite()) {
                return Err(SvdeError::NonFinite { index: i + 1 });
            }
            out.extend_from_slice(&sum);
        }
        Ok(out)
    }

    /// `D_u X_t` for `t = u..=N`.
    pub fn malliavin(&self, path: &SolutionPath, u: usize) -> Result<Vec<Vec<f64>>> {
        let d = path.dim();
        let flat = self.response(path, u, self.euler.grid().steps(), &identity(d))?;
        Ok(flat.chunks(d * d).map(<[f64]>::to_vec).collect())
    }

    /// `D_u X_t` at a single `t`.
    pub fn malliavin_at(&self, path: &SolutionPath, u: usize, t: usize) -> Result<Vec<f64>> {
        let d = path.dim();
        let flat = self.response(path, u, t, &identity(d))?;
        Ok(flat[(t - u) * d * d..].to_vec())
    }
}

/// `D_u X_t` for every `t >= u` along a solved path.
pub fn malliavin_derivative(kernel: &KernelSeries, path: &SolutionPath, u_index: usize) -> Result<Vec<Vec<f64>>> {
    DerivativeSolver::new(kernel, path.grid())?.malliavin(path, u_index)
}

/// The full triangular Malliavin field, `O(N^2 d^2)` memory.
pub fn malliavin_field(kernel: &KernelSeries, path: &SolutionPath) -> Result<DerivativeField> {
    let solver = DerivativeSolver::new(kernel, path.grid())?;
    let d = path.dim();
    let n = path.grid().steps();
    let id = identity(d);
    let rows = (0..=n)
        .map(|u| solver.response(path, u, n, &id))
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivativeField {
        kind: DerivativeKind::Malliavin,
        grid: *path.grid(),
        dim: d,
        rows,
    })
}

/// `dX_t / dx` along a solved path.
pub fn flow_derivative(kernel: &KernelSeries, path: &SolutionPath) -> Result<DerivativeField> {
    let solver = DerivativeSolver::new(kernel, path.grid())?;
    let d = path.dim();
    let row = solver.response(path, 0, path.grid().steps(), &identity(d))?;
    Ok(DerivativeField {
        kind: DerivativeKind::Flow,
        grid: *path.grid(),
        dim: d,
        rows: vec![row],
    })
}

/// Per-pair `L^2` distances `||D_r X_s - D_v X_s||` and their log-log slope.
#[derive(Debug, Clone)]
pub struct HolderStatistic {
    pub pairs: Vec<(usize, usize)>,
    /// `|t_r - t_v|` per pair.
    pub separations: Vec<f64>,
    /// `sqrt(E ||D_r X_s - D_v X_s||_F^2)` per pair.
    pub l2_differences: Vec<Estimate>,
    /// Least-squares slope of `log L2` on `log |r - v|`; `None` if a difference vanishes.
    pub slope: Option<f64>,
    pub zero_difference: bool,
    // squared[pair][path]
    squared: Vec<Vec<f64>>,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn l2_from_squares(squares: &[f64]) -> Estimate {
    let e = Estimate::from_samples(squares);
    let root = e.mean.max(0.0).sqrt();
    Estimate {
        mean: root,
        std_error: if root > 0.0 { e.std_error / (2.0 * root) } else { 0.0 },
        n: e.n,
    }
}

fn slope_of(separations: &[f64], l2: &[f64]) -> Option<f64> {
    if l2.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = separations.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = l2.iter().map(|v| v.ln()).collect();
    Some(ls_slope(&xs, &ys))
}

impl HolderStatistic {
    fn from_squares(grid: &TimeGrid, pairs: &[(usize, usize)], squared: Vec<Vec<f64>>) -> Self {
        let separations: Vec<f64> = pairs
            .iter()
            .map(|&(r, v)| (grid.node(r) - grid.node(v)).abs())
            .collect();
        let l2_differences: Vec<Estimate> = squared.iter().map(|s| l2_from_squares(s)).collect();
        let means: Vec<f64> = l2_differences.iter().map(|e| e.mean).collect();
        let slope = slope_of(&separations, &means);
        Self {
            pairs: pairs.to_vec(),
            separations,
            l2_differences,
            slope,
            zero_difference: slope.is_none(),
            squared,
        }
    }

    /// Slopes recomputed on `resamples` bootstrap resamples of the paths.
    pub fn bootstrap_slopes(&self, resamples: usize, seed: u64) -> Vec<f64> {
        let n = self.squared.first().map_or(0, Vec::len);
        if n == 0 || self.zero_difference {
            return Vec::new();
        }
        (0..resamples as u64)
            .filter_map(|b| {
                let mut rng = path_rng(seed, b);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let l2: Vec<f64> = self
                    .squared
                    .iter()
                    .map(|s| (idx.iter().map(|&i| s[i]).sum::<f64>() / n as f64).sqrt())
                    .collect();
                slope_of(&self.separations, &l2)
            })
            .collect()
    }

    /// Empirical lower `alpha` quantile of the bootstrap slopes.
    pub fn bootstrap_lower_bound(&self, resamples: usize, alpha: f64, seed: u64) -> Option<f64> {
        let mut slopes = self.bootstrap_slopes(resamples, seed);
        if slopes.is_empty() {
            return None;
        }
        slopes.sort_by(f64::total_cmp);
        let k = ((alpha * slopes.len() as f64).floor() as usize).min(slopes.len() - 1);
        Some(slopes[k])
    }

    /// Standard deviation of the bootstrap slopes.
    pub fn bootstrap_std_error(&self, resamples: usize, seed: u64) -> Option<f64> {
        let slopes = self.bootstrap_slopes(resamples, seed);
        if slopes.len() < 2 {
            return None;
        }
        let e = Estimate::from_samples(&slopes);
        Some(e.std_error * (slopes.len() as f64).sqrt())
    }
}

fn validate_pairs(grid: &TimeGrid, pairs: &[(usize, usize)], s_index: usize) -> Result<()> {
    if pairs.len() < 2 {
        return Err(SvdeError::Insufficient(
            "the Hölder statistic needs at least two (r, v) pairs".into(),
        ));
    }
    grid.check_index(s_index)?;
    for &(r, v) in pairs {
        if r == v {
            return Err(invalid("u_pairs", format!("pair ({r}, {v}) has r = v")));
        }
        if r > s_index || v > s_index {
            return Err(invalid("u_pairs", format!("pair ({r}, {v}) exceeds t_index {s_index}")));
        }
    }
    Ok(())
}

struct PathMoments {
    state_sq: f64,
    derivative_sq: Vec<f64>,
    pair_sq: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn path_moments(
    solver: &DerivativeSolver<'_>,
    x: &[f64],
    seed: u64,
    n_paths: usize,
    t_index: usize,
    u_indices: &[usize],
    pairs: &[(usize, usize)],
) -> Result<Vec<PathMoments>> {
    let grid = *solver.euler().grid();
    let mut distinct: Vec<usize> = u_indices
        .iter()
        .copied()
        .chain(pairs.iter().flat_map(|&(r, v)| [r, v]))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    map_paths(n_paths, |p| {
        let noise = sample_brownian(&grid, x.len(), seed, p)?;
        let path = solver.euler().solve(x, &noise)?;
        let mut at_u = Vec::with_capacity(distinct.len());
        for &u in &distinct {
            at_u.push(solver.malliavin_at(&path, u, t_index)?);
        }
        let lookup = |u: usize| &at_u[distinct.binary_search(&u).expect("collected above")];
        Ok(PathMoments {
            state_sq: path.at(t_index).iter().map(|v| v * v).sum(),
            derivative_sq: u_indices.iter().map(|&u| frobenius(lookup(u)).powi(2)).collect(),
            pair_sq: pairs
                .iter()
                .map(|&(r, v)| {
                    let diff: Vec<f64> = lookup(r).iter().zip(lookup(v)).map(|(a, b)| a - b).collect();
                    frobenius(&diff).powi(2)
                })
                .collect(),
        })
    })
}

fn transpose_pairs(moments: &[PathMoments], n_pairs: usize) -> Vec<Vec<f64>> {
    (0..n_pairs)
        .map(|k| moments.iter().map(|m| m.pair_sq[k]).collect())
        .collect()
}

/// Monte Carlo Hölder statistic of `u -> D_u X_s` over `n_paths` Euler paths.
#[allow(clippy::too_many_arguments)]
pub fn holder_statistic(
    kernel: &KernelSeries,
    x: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    u_pairs: &[(usize, usize)],
    s_index: usize,
) -> Result<HolderStatistic> {
    validate_pairs(grid, u_pairs, s_index)?;
    require_paths(n_paths, 2)?;
    let solver = DerivativeSolver::new(kernel, grid)?;
    let moments = path_moments(&solver, x, seed, n_paths, s_index, &[], u_pairs)?;
    Ok(HolderStatistic::from_squares(
        grid,
        u_pairs,
        transpose_pairs(&moments, u_pairs.len()),
    ))
}

/// Statistics of one approximation level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStatistics {
    pub level: f64,
    /// `sqrt(E |X_t|^2)`.
    pub l2: Estimate,
    /// `max_u sqrt(E ||D_u X_t||_F^2)` over the sampled `u`.
    pub derivative_l2: Estimate,
    /// Hölder slope with bootstrap standard error; NaN when undefined.
    pub holder_slope: Estimate,
}

/// Bootstrap resamples used for the Hölder slope standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Computes [`LevelStatistics`] for one kernel.
#[allow(clippy::too_many_arguments)]
pub fn level_statistics(
    level: f64,
    kernel: &KernelSeries,
    x: &[f64],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    t_index: usize,
    u_indices: &[usize],
    u_pairs: &[(usize, usize)],
) -> Result<LevelStatistics> {
    require_paths(n_paths, 2)?;
    if u_indices.is_empty() {
        return Err(SvdeError::Insufficient("at least one u index is required".into()));
    }
    if let Some(&u) = u_indices.iter().find(|&&u| u > t_index) {
        return Err(invalid("u_indices", format!("u = {u} exceeds t_index {t_index}")));
    }
    validate_pairs(grid, u_pairs, t_index)?;
    let solver = DerivativeSolver::new(kernel, grid)?;
    let moments = path_moments(&solver, x, seed, n_paths, t_index, u_indices, u_pairs)?;

    let state: Vec<f64> = moments.iter().map(|m| m.state_sq).collect();
    let l2 = l2_from_squares(&state);
    let derivative_l2 = (0..u_indices.len())
        .map(|k| l2_from_squares(&moments.iter().map(|m| m.derivative_sq[k]).collect::<Vec<_>>()))
        .fold(Estimate::exact(f64::NEG_INFINITY), |best, e| {
            if e.mean > best.mean {
                e
            } else {
                best
            }
        });

    let holder = HolderStatistic::from_squares(grid, u_pairs, transpose_pairs(&moments, u_pairs.len()));
    let holder_slope = match holder.slope {
        Some(s) => Estimate {
            mean: s,
            std_error: holder
                .bootstrap_std_error(BOOTSTRAP_RESAMPLES, seed)
                .unwrap_or(f64::NAN),
            n: n_paths,
        },
        None => Estimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            n: n_paths,
        },
    };
    Ok(LevelStatistics {
        level,
        l2,
        derivative_l2,
        holder_slope,
    })
}

/// Summary of the three compactness hypotheses across levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessReport {
    pub sup_l2: Estimate,
    pub sup_derivative_l2: Estimate,
    /// Smallest Hölder slope across levels.
    pub holder_slope: Estimate,
    /// No significant increase of the `L^2` norm between the two finest
    /// levels. A convergent sequence may rise at coarse levels, so only the
    /// tail is tested.
    pub l2_bounded: bool,
    pub derivative_bounded: bool,
    /// Every level has a finite positive slope.
    pub holder_positive: bool,
}

/// One-sided 95% normal quantile used for growth tests.
const GROWTH_Z: f64 = 1.645;

fn no_growth(levels: &[LevelStatistics], pick: impl Fn(&LevelStatistics) -> Estimate) -> bool {
    match levels {
        [.., before, last] => {
            let (a, b) = (pick(before), pick(last));
            b.mean - a.mean <= GROWTH_Z * a.combined_se(&b)
        }
        _ => true,
    }
}

fn sup(levels: &[LevelStatistics], pick: impl Fn(&LevelStatistics) -> Estimate) -> Estimate {
    levels
        .iter()
        .map(pick)
        .fold(Estimate::exact(f64::NEG_INFINITY), |best, e| {
            if e.mean > best.mean {
                e
            } else {
                best
            }
        })
}

pub fn compactness_hypothesis_check(levels: &[LevelStatistics]) -> Result<CompactnessReport> {
    if levels.is_empty() {
        return Err(SvdeError::Insufficient("no approximation levels supplied".into()));
    }
    let holder_slope = levels
        .iter()
        .map(|l| l.holder_slope)
        .fold(Estimate::exact(f64::INFINITY), |best, e| {
            if !(e.mean >= best.mean) {
                e
            } else {
                best
            }
        });
    Ok(CompactnessReport {
        sup_l2: sup(levels, |l| l.l2),
        sup_derivative_l2: sup(levels, |l| l.derivative_l2),
        holder_slope,
        l2_bounded: no_growth(levels, |l| l.l2),
        derivative_bounded: no_growth(levels, |l| l.derivative_l2),
        holder_positive: levels.iter().all(|l| l.holder_slope.mean > 0.0),
    })
}
