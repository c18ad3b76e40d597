//! Smooth approximations `g^(n) = g(s, .) * rho_n` of merely bounded fields
//! and the weak-convergence study of the corresponding solutions.
//!
//! `rho_n(z) = n^d rho(n z)` with `rho(y) ~ exp(-1 / (1 - |y|^2))` on the unit
//! ball. The convolution is evaluated with a tensor midpoint rule on
//! `[-1, 1]^d`; since `rho` vanishes to all orders at the boundary the rule is
//! spectrally accurate for smooth `g`. Nodes are summed in mirrored pairs so
//! odd fields mollify to exactly zero at the origin.
//!
//! Gradients differentiate the quadrature sum itself when `g` has one, so
//! they are consistent with the values. Otherwise the derivative is moved onto
//! the bump, which is the right limit but only quadrature-accurate.
//!
//! The mollified field is further multiplied by a smooth cutoff equal to one on
//! `|x| <= CUTOFF_RADIUS` and vanishing beyond `CUTOFF_RADIUS + 1`, which
//! makes it compactly supported.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::girsanov::weak_estimator;
use crate::grid::TimeGrid;
use crate::kernel::{CoefficientField, Field, KernelSeries};
use crate::montecarlo::{estimate_states, euler_states, independent_seed, require_paths, Estimate};
use crate::phi::TestFunction;

/// Inner radius of the spatial cutoff.
pub const CUTOFF_RADIUS: f64 = 10.0;

/// Largest supported state dimension (the quadrature is tensorised).
pub const MAX_DIM: usize = 3;

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `r <= 0`, 0 for `r >= 1`.
fn smooth_step(r: f64) -> (f64, f64) {
    if r <= 0.0 {
        return (1.0, 0.0);
    }
    if r >= 1.0 {
        return (0.0, 0.0);
    }
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let df = |u: f64| if u > 0.0 { (-1.0 / u).exp() / (u * u) } else { 0.0 };
    let (a, b) = (f(1.0 - r), f(r));
    let (da, db) = (-df(1.0 - r), df(r));
    let value = a / (a + b);
    let deriv = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
    (value, deriv)
}

/// `g` convolved with the bump of radius `1 / level`.
#[derive(Debug)]
pub struct MollifiedField {
    base: Field,
    level: u32,
    dim: usize,
    // quadrature nodes y_q in [-1, 1]^d (flattened), mirrored: node q and len-1-q
    nodes: Vec<f64>,
    // normalised bump weights, summing to one
    weights: Vec<f64>,
    // gradient weights, n * w_q * d(rho)/dy_k / Z, flattened [q][k]
    grad_weights: Vec<f64>,
}

impl MollifiedField {
    pub fn base(&self) -> &Field {
        &self.base
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.level as f64
    }

    fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    fn shifted(&self, x: &[f64], q: usize, sign: f64, buf: &mut [f64]) {
        let h = self.radius();
        let y = &self.nodes[q * self.dim..(q + 1) * self.dim];
        for k in 0..self.dim {
            buf[k] = x[k] - sign * h * y[k];
        }
    }

    /// Convolution without the cutoff.
    fn convolve(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let m = self.n_nodes();
        let mut xs = vec![0.0; d];
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        out.fill(0.0);
        for q in 0..m / 2 {
            // node m-1-q is the mirror image -y_q and carries the same weight
            self.shifted(x, q, 1.0, &mut xs);
            self.base.evaluate(s, &xs, &mut plus);
            self.shifted(x, q, -1.0, &mut xs);
            self.base.evaluate(s, &xs, &mut minus);
            let w = self.weights[q];
            for c in 0..d {
                out[c] += w * (plus[c] + minus[c]);
            }
        }
        if m % 2 == 1 {
            let q = m / 2;
            self.base.evaluate(s, x, &mut plus);
            for c in 0..d {
                out[c] += self.weights[q] * plus[c];
            }
        }
    }

    fn convolve_jacobian(&self, s: f64, x: &[f64], jac: &mut [f64]) {
        let d = self.dim;
        let m = self.n_nodes();
        let mut xs = vec![0.0; d];
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        jac.fill(0.0);
        if self.base.has_gradient() {
            // exact derivative of the quadrature sum
            let mut part = vec![0.0; d * d];
            for q in 0..m {
                self.shifted(x, q, 1.0, &mut xs);
                self.base.jacobian(s, &xs, &mut part);
                for (j, p) in jac.iter_mut().zip(&part) {
                    *j += self.weights[q] * p;
                }
            }
            return;
        }
        for q in 0..m / 2 {
            self.shifted(x, q, 1.0, &mut xs);
            self.base.evaluate(s, &xs, &mut plus);
            self.shifted(x, q, -1.0, &mut xs);
            self.base.evaluate(s, &xs, &mut minus);
            // the bump gradient is odd, so the mirror node enters with a minus sign
            let gw = &self.grad_weights[q * d..(q + 1) * d];
            for c in 0..d {
                let diff = plus[c] - minus[c];
                for k in 0..d {
                    jac[c * d + k] += gw[k] * diff;
                }
            }
        }
    }

    fn cutoff(x: &[f64]) -> (f64, f64) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        smooth_step(r - CUTOFF_RADIUS)
    }
}

impl CoefficientField for MollifiedField {
    fn evaluate(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let (chi, _) = Self::cutoff(x);
        if chi == 0.0 {
            out.fill(0.0);
            return;
        }
        self.convolve(s, x, out);
        if chi != 1.0 {
            out.iter_mut().for_each(|v| *v *= chi);
        }
    }

    fn sup_bound(&self) -> f64 {
        self.base.sup_bound()
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn jacobian(&self, s: f64, x: &[f64], jac: &mut [f64]) {
        let d = self.dim;
        let (chi, dchi) = Self::cutoff(x);
        if chi == 0.0 {
            jac.fill(0.0);
            return;
        }
        self.convolve_jacobian(s, x, jac);
        if chi != 1.0 {
            let mut value = vec![0.0; d];
            self.convolve(s, x, &mut value);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for c in 0..d {
                for k in 0..d {
                    jac[c * d + k] = chi * jac[c * d + k] + value[c] * dchi * x[k] / r;
                }
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn name(&self) -> String {
        format!("mollified[{}](n={})", self.base.name(), self.level)
    }
}

/// Builds the level-`n` mollification of `g` on `R^dim` with `quad_points`
/// midpoint nodes per axis.
pub fn mollify_field(g: &Field, n: u32, quad_points: usize, dim: usize) -> Result<MollifiedField> {
    if n == 0 {
        return Err(invalid("n", "mollification level must be positive"));
    }
    if quad_points == 0 {
        return Err(invalid(
            "quad_points",
            "at least one quadrature node per axis is required",
        ));
    }
    if dim == 0 || dim > MAX_DIM {
        return Err(invalid(
            "d",
            format!("mollification supports 1 <= d <= {MAX_DIM}, got {dim}"),
        ));
    }
    if let Some(fd) = g.dim() {
        if fd != dim {
            return Err(crate::error::SvdeError::DimensionMismatch {
                expected: dim,
                actual: fd,
            });
        }
    }
    let axis: Vec<f64> = (0..quad_points)
        .map(|i| -1.0 + (2 * i + 1) as f64 / quad_points as f64)
        .collect();
    let cell = (2.0 / quad_points as f64).powi(dim as i32);
    let total = quad_points.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total * dim);
    let mut raw = Vec::with_capacity(total);
    let mut raw_grad = Vec::with_capacity(total * dim);
    for flat in 0..total {
        let mut rem = flat;
        let mut y = vec![0.0; dim];
        for k in (0..dim).rev() {
            y[k] = axis[rem % quad_points];
            rem /= quad_points;
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let rho = bump(r2);
        raw.push(cell * rho);
        for &yk in &y {
            // d rho / dy_k = rho * (-2 y_k / (1 - r^2)^2)
            let g = if r2 < 1.0 {
                -2.0 * yk * rho / (1.0 - r2).powi(2)
            } else {
                0.0
            };
            raw_grad.push(cell * g);
        }
        nodes.extend_from_slice(&y);
    }
    // node total-1-q is the mirror image of node q; evaluation relies on it
    let z: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();
    // d/dx g_n(x) = int g(x - y/n) n d(rho)(y) dy / Z
    let grad_weights = raw_grad.iter().map(|w| n as f64 * w / z).collect();
    Ok(MollifiedField {
        base: g.clone(),
        level: n,
        dim,
        nodes,
        weights,
        grad_weights,
    })
}

/// Mollifies every coefficient field of `kernel` at level `n`.
pub fn mollify_kernel(kernel: &KernelSeries, n: u32, quad_points: usize, dim: usize) -> Result<KernelSeries> {
    kernel.map_fields(|g| Ok(Arc::new(mollify_field(g, n, quad_points, dim)?) as Field))
}

/// One row of a weak-convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimate {
    pub level: u32,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakConvergenceTable {
    pub rows: Vec<LevelEstimate>,
    /// Change-of-measure estimate for the unmollified kernel.
    pub reference: Estimate,
}

impl WeakConvergenceTable {
    /// `|est(last) - ref| <= |est(first) - ref| + z * combined SE`.
    pub fn trend_toward_reference(&self, z: f64) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(first), Some(last)) => {
                let d_first = (first.estimate.mean - self.reference.mean).abs();
                let d_last = (last.estimate.mean - self.reference.mean).abs();
                d_last <= d_first + z * last.estimate.combined_se(&self.reference)
            }
            _ => false,
        }
    }

    /// Finest level within `z` combined standard errors of the reference.
    pub fn finest_matches_reference(&self, z: f64) -> bool {
        self.rows
            .last()
            .is_some_and(|last| last.estimate.agrees_with(&self.reference, z))
    }
}

/// Euler estimates of `E[phi(X_t^n)]` for each level (common random numbers)
/// plus a change-of-measure reference for `reference_kernel`, run on an
/// independent stream.
#[allow(clippy::too_many_arguments)]
pub fn weak_convergence_study(
    levels: &[(u32, KernelSeries)],
    reference_kernel: &KernelSeries,
    x: &[f64],
    phi: &TestFunction,
    t_index: usize,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<WeakConvergenceTable> {
    if levels.is_empty() {
        return Err(crate::error::SvdeError::Insufficient(
            "no mollification levels supplied".into(),
        ));
    }
    require_paths(n_paths, 2)?;
    let rows = levels
        .iter()
        .map(|(n, k)| {
            let states = euler_states(k, x, t_index, grid, n_paths, seed)?;
            Ok(LevelEstimate {
                level: *n,
                estimate: estimate_states(&states, phi),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = weak_estimator(reference_kernel, x, phi, t_index, grid, n_paths, independent_seed(seed))?.estimate;
    Ok(WeakConvergenceTable { rows, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{finite_difference_jacobian, Cosine, FnField, Sign};

    fn probes() -> Vec<f64> {
        (0..12).map(|i| -2.3 + 0.41 * i as f64).collect()
    }

    #[test]
    fn sign_is_zero_at_origin() {
        for q in [8, 9, 32] {
            let m = mollify_field(&Sign::field(), 16, q, 1).unwrap();
            let mut out = [1.0];
            m.evaluate(0.0, &[0.0], &mut out);
            assert_eq!(out[0], 0.0);
        }
        let m = mollify_field(&Sign::field(), 4, 12, 2).unwrap();
        let mut out = [1.0, 1.0];
        m.evaluate(0.0, &[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn non_expansion() {
        for n in [1, 4, 64] {
            let m = mollify_field(&Sign::field(), n, 31, 1).unwrap();
            assert_eq!(m.sup_bound(), 1.0);
            let mut out = [0.0];
            for x in probes() {
                m.evaluate(0.0, &[x * 0.01], &mut out);
                assert!(out[0].abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn cosine_converges_monotonically() {
        let g = Cosine::field(1.0);
        let mut out = [0.0];
        for x in probes() {
            let mut prev = f64::INFINITY;
            for n in [4, 16, 64] {
                let m = mollify_field(&g, n, 32, 1).unwrap();
                m.evaluate(0.0, &[x], &mut out);
                let err = (out[0] - x.cos()).abs();
                assert!(err <= prev + 1e-13, "x={x} n={n}");
                prev = err;
            }
            assert!(prev < 1e-3);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g: Field = FnField::new("smooth", 1.0, |_, x, o| {
            o[0] = (x[0] * x[1]).sin();
            o[1] = x[0].cos();
        })
        .with_jacobian(|_, x, j| {
            let c = (x[0] * x[1]).cos();
            j.copy_from_slice(&[x[1] * c, x[0] * c, -x[0].sin(), 0.0]);
        })
        .into_field();
        let m = mollify_field(&g, 3, 24, 2).unwrap();
        let mut jac = vec![0.0; 4];
        for (a, b) in [(0.3, -0.2), (1.1, 0.7), (-0.4, 2.0)] {
            m.jacobian(0.0, &[a, b], &mut jac);
            let fd = finite_difference_jacobian(&m, 0.0, &[a, b], 1e-5);
            for (u, v) in jac.iter().zip(&fd) {
                assert!((u - v).abs() <= 1e-4 * v.abs().max(1e-2), "{jac:?} vs {fd:?}");
            }
        }
        // sign mollifies to a smooth field with gradient ~ n near the jump
        let s = mollify_field(&Sign::field(), 8, 64, 1).unwrap();
        let mut j = [0.0];
        s.jacobian(0.0, &[0.0], &mut j);
        // d/dx (sign * rho_n)(0) = 2 rho_n(0)
        let exact = 2.0 * 8.0 * (-1.0f64).exp() / 0.443_993_816_168_079_4;
        assert!((j[0] - exact).abs() <= 1e-3 * exact, "{} vs {exact}", j[0]);
    }

    #[test]
    fn cutoff_gives_compact_support() {
        let m = mollify_field(&Cosine::field(1.0), 4, 16, 1).unwrap();
        let mut out = [0.0];
        m.evaluate(0.0, &[CUTOFF_RADIUS + 1.5], &mut out);
        assert_eq!(out[0], 0.0);
        m.evaluate(0.0, &[CUTOFF_RADIUS + 0.5], &mut out);
        assert!(out[0].abs() < 1.0 && out[0] != 0.0);
        let mut jac = [0.0];
        m.jacobian(0.0, &[CUTOFF_RADIUS + 0.4], &mut jac);
        let fd = finite_difference_jacobian(&m, 0.0, &[CUTOFF_RADIUS + 0.4], 1e-6);
        assert!((jac[0] - fd[0]).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(mollify_field(&Sign::field(), 4, 8, 4).is_err());
        assert!(mollify_field(&Sign::field(), 0, 8, 1).is_err());
        assert!(mollify_field(&Sign::field(), 4, 0, 1).is_err());
    }

    #[test]
    fn identical_levels_give_identical_estimates() {
        let grid = crate::grid::make_grid(0.5, 20).unwrap();
        let base = KernelSeries::new(0.5).unwrap().with_term(0, Sign::field()).unwrap();
        let k = mollify_kernel(&base, 8, 16, 1).unwrap();
        let table = weak_convergence_study(
            &[(8, k.clone()), (8, k)],
            &base,
            &[0.0],
            &TestFunction::Square,
            20,
            &grid,
            500,
            3,
        )
        .unwrap();
        assert_eq!(table.rows[0].estimate, table.rows[1].estimate);
        assert!(weak_convergence_study(&[], &base, &[0.0], &TestFunction::Id, 20, &grid, 10, 0).is_err());
    }
}
