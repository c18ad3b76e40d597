//! Running evaluation of left-point Volterra sums
//! `S(i) = sum_{j<i} b(t_i, t_j, X_j) dt` (and their Jacobian analogue).
//!
//! For a termwise kernel, `(t_i - t_j)^m` is expanded binomially into
//! `sum_a binom(m, a) t_i^(m-a) (-t_j)^a`, so each node only updates running
//! sums `sum_j (-t_j)^a g_m(t_j, X_j) dt`. A step then costs `O(M^2)` instead
//! of `O(i M)`. Kernels carrying a fixed-point polynomial profile are summed
//! against a precomputed lag table instead, which is `O(i)` per step.

use crate::grid::TimeGrid;
use crate::kernel::KernelSeries;

#[derive(Debug, Clone)]
enum Scheme {
    Binomial {
        exponents: Vec<u32>,
        // binomials[m][a] = binom(m, a), up to the largest exponent
        binomials: Vec<Vec<f64>>,
    },
    Lag {
        // weights[l] = p(l dt) dt
        weights: Vec<f64>,
    },
}

/// Per-(kernel, grid) precomputation shared by every path.
#[derive(Debug, Clone)]
pub struct VolterraPlan<'k> {
    kernel: &'k KernelSeries,
    grid: TimeGrid,
    scheme: Scheme,
}

impl<'k> VolterraPlan<'k> {
    pub fn new(kernel: &'k KernelSeries, grid: &TimeGrid) -> Self {
        let scheme = match kernel.profile() {
            Some(p) => Scheme::Lag {
                weights: (0..=grid.steps())
                    .map(|l| p.polynomial.evaluate(l as f64 * grid.dt()) * grid.dt())
                    .collect(),
            },
            None => {
                let max_m = kernel.max_exponent().unwrap_or(0) as usize;
                let mut binomials = vec![vec![1.0]];
                for m in 1..=max_m {
                    let prev = &binomials[m - 1];
                    let mut row = vec![1.0; m + 1];
                    for a in 1..m {
                        row[a] = prev[a - 1] + prev[a];
                    }
                    binomials.push(row);
                }
                Scheme::Binomial {
                    exponents: kernel.terms().iter().map(|t| t.exponent).collect(),
                    binomials,
                }
            }
        };
        Self {
            kernel,
            grid: *grid,
            scheme,
        }
    }

    pub fn kernel(&self) -> &'k KernelSeries {
        self.kernel
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Fresh accumulator for values of the given width (`d` or `d*d`).
    pub fn sum(&self, width: usize) -> VolterraSum<'_, 'k> {
        self.sum_from(width, 0)
    }

    /// Accumulator whose first pushed node is `start` (sums over `start <= j`).
    pub fn sum_from(&self, width: usize, start: usize) -> VolterraSum<'_, 'k> {
        let storage = match &self.scheme {
            Scheme::Binomial { exponents, .. } => {
                let slots: usize = exponents.iter().map(|&m| m as usize + 1).sum();
                vec![0.0; slots * width]
            }
            Scheme::Lag { .. } => Vec::with_capacity(self.grid.len() * width),
        };
        VolterraSum {
            plan: self,
            width,
            storage,
            start,
            pushed: 0,
            scratch: vec![0.0; width],
        }
    }
}

/// Accumulated history of one path.
pub struct VolterraSum<'p, 'k> {
    plan: &'p VolterraPlan<'k>,
    width: usize,
    // Binomial: per term m, per power a in 0..=m, a block of `width` values.
    // Lag: node-major history of pushed values.
    storage: Vec<f64>,
    start: usize,
    pushed: usize,
    scratch: Vec<f64>,
}

impl VolterraSum<'_, '_> {
    /// Number of nodes pushed so far.
    pub fn len(&self) -> usize {
        self.pushed
    }

    /// Grid index of the next node to push.
    pub fn next_node(&self) -> usize {
        self.start + self.pushed
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }

    /// Registers node `j = self.next_node()` with state `x`: adds `g_m(t_j, x) dt`.
    pub fn push_state(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.width);
        let j = self.next_node();
        let s = self.plan.grid.node(j);
        let dt = self.plan.grid.dt();
        match &self.plan.scheme {
            Scheme::Lag { .. } => {
                let field = &self.plan.kernel.profile().expect("lag scheme needs a profile").field;
                field.evaluate(s, x, &mut self.scratch);
                self.storage.extend_from_slice(&self.scratch);
            }
            Scheme::Binomial { .. } => {
                let mut offset = 0;
                for term in self.plan.kernel.terms() {
                    term.field.evaluate(s, x, &mut self.scratch);
                    offset = add_powers(&mut self.storage, offset, term.exponent, s, dt, &self.scratch);
                }
            }
        }
        self.pushed += 1;
    }

    /// Registers node `j` for the linearised equation: adds
    /// `Dg_m(t_j, x) * m_j * dt` where `m_j` is a row-major `d x d` matrix.
    pub fn push_linear(&mut self, x: &[f64], matrix: &[f64], jac: &mut [f64]) {
        let d = x.len();
        debug_assert_eq!(self.width, d * d);
        let j = self.next_node();
        let s = self.plan.grid.node(j);
        let dt = self.plan.grid.dt();
        match &self.plan.scheme {
            Scheme::Lag { .. } => {
                let field = &self.plan.kernel.profile().expect("lag scheme needs a profile").field;
                field.jacobian(s, x, jac);
                matmul(jac, matrix, d, &mut self.scratch);
                self.storage.extend_from_slice(&self.scratch);
            }
            Scheme::Binomial { .. } => {
                let mut offset = 0;
                for term in self.plan.kernel.terms() {
                    term.field.jacobian(s, x, jac);
                    matmul(jac, matrix, d, &mut self.scratch);
                    offset = add_powers(&mut self.storage, offset, term.exponent, s, dt, &self.scratch);
                }
            }
        }
        self.pushed += 1;
    }

    /// Writes the sum over every pushed node `j` of the kernel evaluated at
    /// `(t_i, t_j)` into `out`. Requires `i >= next_node()`.
    pub fn query(&self, i: usize, out: &mut [f64]) {
        debug_assert!(i >= self.next_node());
        out.fill(0.0);
        let w = self.width;
        match &self.plan.scheme {
            Scheme::Lag { weights } => {
                for k in 0..self.pushed {
                    let wt = weights[i - self.start - k];
                    for (o, v) in out.iter_mut().zip(&self.storage[k * w..(k + 1) * w]) {
                        *o += wt * v;
                    }
                }
            }
            Scheme::Binomial { exponents, binomials } => {
                let t = self.plan.grid.node(i);
                let mut offset = 0;
                for &m in exponents {
                    let m = m as usize;
                    for (a, binom) in binomials[m].iter().enumerate().take(m + 1) {
                        let coeff = binom * t.powi((m - a) as i32);
                        let block = &self.storage[offset..offset + w];
                        for (o, v) in out.iter_mut().zip(block) {
                            *o += coeff * v;
                        }
                        offset += w;
                    }
                }
            }
        }
    }
}

fn add_powers(storage: &mut [f64], mut offset: usize, m: u32, s: f64, dt: f64, value: &[f64]) -> usize {
    let w = value.len();
    let mut power = dt;
    for _ in 0..=m {
        for (st, v) in storage[offset..offset + w].iter_mut().zip(value) {
            *st += power * v;
        }
        power *= -s;
        offset += w;
    }
    offset
}

/// `out = a * b` for row-major `d x d` matrices.
pub(crate) fn matmul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for r in 0..d {
        for c in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[r * d + k] * b[k * d + c];
            }
            out[r * d + c] = acc;
        }
    }
}
