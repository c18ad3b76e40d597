//! Left-point iterated integrals on a uniform grid and the repeated-integration
//! identity `int_0^t (t-s)^k f(s) ds = k! I^{k+1}[f](t)`.

use crate::error::{Result, SvdeError};
use crate::grid::TimeGrid;

/// A vector-valued function sampled at every node of a grid, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * dim {
            return Err(SvdeError::DimensionMismatch {
                expected: grid.len() * dim,
                actual: values.len(),
            });
        }
        Ok(Self {
            grid: *grid,
            dim,
            values,
        })
    }

    /// Samples a scalar function of time.
    pub fn from_scalar(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: *grid,
            dim: 1,
            values: grid.nodes().into_iter().map(f).collect(),
        }
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

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// `I[f](t_i) = sum_{j<i} f(t_j) dt`, in place.
fn cumulate_left(values: &mut [f64], dim: usize, dt: f64) {
    let mut running = vec![0.0; dim];
    for node in values.chunks_mut(dim) {
        for (r, v) in running.iter_mut().zip(node.iter_mut()) {
            let f = *v;
            *v = *r;
            *r += f * dt;
        }
    }
}

/// The `k`-fold running integral `I^k[f]` (`I^0` is the identity).
pub fn iterated_integral(f: &GridFunction, k: usize) -> GridFunction {
    let mut values = f.values.clone();
    let dt = f.grid.dt();
    for _ in 0..k {
        cumulate_left(&mut values, f.dim, dt);
    }
    GridFunction {
        grid: f.grid,
        dim: f.dim,
        values,
    }
}

/// Direct quadrature of `int_0^{t_i} (t_i - s)^k f(s) ds`.
///
/// Cell `[t_j, t_{j+1})` contributes `f(t_j) (t_i - t_{j+1})^k dt`: the
/// integrand is sampled at the left end, the distance factor counts only the
/// nodes strictly after `t_j`, which is how the iterated left-point sums see it.
/// The two routes then coincide for `k <= 1` and differ by `O(dt)` for `k >= 2`.
pub fn convolution_quadrature(f: &GridFunction, k: usize) -> GridFunction {
    let n = f.grid.steps();
    let dt = f.grid.dt();
    let d = f.dim;
    let mut values = vec![0.0; f.values.len()];
    for i in 1..=n {
        for j in 0..i {
            let w = ((i - j - 1) as f64 * dt).powi(k as i32) * dt;
            for c in 0..d {
                values[i * d + c] += w * f.values[j * d + c];
            }
        }
    }
    GridFunction {
        grid: f.grid,
        dim: d,
        values,
    }
}

/// Max over nodes and components of `|int_0^t (t-s)^k f ds - k! I^{k+1}[f](t)|`.
pub fn cauchy_check(f: &GridFunction, k: usize) -> f64 {
    let direct = convolution_quadrature(f, k);
    let iterated = iterated_integral(f, k + 1);
    let k_fact = (1..=k).fold(1.0, |acc, j| acc * j as f64);
    direct
        .values
        .iter()
        .zip(&iterated.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - k_fact * b).abs()))
}
