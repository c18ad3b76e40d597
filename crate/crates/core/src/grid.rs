//! Uniform time grids and reproducible Brownian paths.
//!
//! Every path is generated from its own ChaCha8 stream keyed by
//! `(seed, path_index)`, so a path never depends on which worker produced it
//! or on the order in which paths are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result, SvdeError};

/// Uniform discretisation of `[0, T]` into `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(
                "T",
                format!("horizon must be positive and finite, got {horizon}"),
            ));
        }
        if steps == 0 {
            return Err(invalid("N", "at least one step is required"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `t_i = i T / N`; the last node is exactly `T`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.steps);
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index > self.steps {
            return Err(invalid("t_index", format!("index {index} exceeds N = {}", self.steps)));
        }
        Ok(())
    }
}

/// Shorthand for [`TimeGrid::new`].
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

/// A `d`-dimensional Brownian path sampled on a [`TimeGrid`].
///
/// Values are stored node-major: component `c` at node `i` lives at
/// `i * d + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    dim: usize,
    seed: u64,
    path_index: u64,
    values: Vec<f64>,
}

impl BrownianPath {
    /// The identically zero path (noise switched off).
    pub fn zero(grid: &TimeGrid, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            grid: *grid,
            dim,
            seed: 0,
            path_index: 0,
            values: vec![0.0; grid.len() * dim],
        })
    }

    /// Builds a path from explicit increments `B(i+1) - B(i)`, node-major.
    pub fn from_increments(grid: &TimeGrid, dim: usize, increments: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if increments.len() != grid.steps() * dim {
            return Err(SvdeError::DimensionMismatch {
                expected: grid.steps() * dim,
                actual: increments.len(),
            });
        }
        let mut values = vec![0.0; grid.len() * dim];
        for i in 0..grid.steps() {
            for c in 0..dim {
                values[(i + 1) * dim + c] = values[i * dim + c] + increments[i * dim + c];
            }
        }
        Ok(Self {
            grid: *grid,
            dim,
            seed: 0,
            path_index: 0,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `B(t_i)` as a slice of length `d`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Increment `B(i+1) - B(i)` for component `c`.
    pub fn increment(&self, i: usize, c: usize) -> f64 {
        self.values[(i + 1) * self.dim + c] - self.values[i * self.dim + c]
    }

    /// The mirrored path `-B`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(invalid("d", "dimension must be positive"));
    }
    Ok(())
}

/// Random stream dedicated to one `(seed, path_index)` pair.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Samples the Brownian path with index `path_index` of the family keyed by `seed`.
pub fn sample_brownian(grid: &TimeGrid, dim: usize, seed: u64, path_index: u64) -> Result<BrownianPath> {
    check_dim(dim)?;
    let mut rng = path_rng(seed, path_index);
    let sd = grid.dt().sqrt();
    let mut values = vec![0.0; grid.len() * dim];
    for i in 0..grid.steps() {
        for c in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[(i + 1) * dim + c] = values[i * dim + c] + sd * z;
        }
    }
    Ok(BrownianPath {
        grid: *grid,
        dim,
        seed,
        path_index,
        values,
    })
}
