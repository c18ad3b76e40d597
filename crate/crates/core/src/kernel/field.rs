//! Coefficient fields `g_m(s, x)` of a power-series kernel.

use std::fmt;
use std::sync::Arc;

/// A vector field `g(s, x): [0, T] x R^d -> R^d` with a declared sup-norm bound.
///
/// Implementations must be safe to evaluate from many threads at once.
pub trait CoefficientField: Send + Sync + fmt::Debug {
    /// Writes `g(s, x)` into `out` (same length as `x`).
    fn evaluate(&self, s: f64, x: &[f64], out: &mut [f64]);

    /// Declared upper bound for `sup |g|` (componentwise max norm).
    fn sup_bound(&self) -> f64;

    /// Whether [`CoefficientField::jacobian`] is available.
    fn has_gradient(&self) -> bool {
        false
    }

    /// Writes the spatial Jacobian `Dg(s, x)` into `jac` (row-major `d x d`).
    /// Only called when [`CoefficientField::has_gradient`] is true.
    fn jacobian(&self, _s: f64, _x: &[f64], _jac: &mut [f64]) {
        unimplemented!("{self:?} has no spatial gradient")
    }

    /// Fixed dimension, if the field is not componentwise.
    fn dim(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> String;
}

/// Shared handle to a coefficient field.
pub type Field = Arc<dyn CoefficientField>;

/// `g(s, x) = c`.
#[derive(Debug, Clone)]
pub struct Constant {
    value: Vec<f64>,
}

impl Constant {
    pub fn new(value: Vec<f64>) -> Self {
        Self { value }
    }

    pub fn field(value: Vec<f64>) -> Field {
        Arc::new(Self::new(value))
    }
}

impl CoefficientField for Constant {
    fn evaluate(&self, _s: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }

    fn sup_bound(&self) -> f64 {
        self.value.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, _x: &[f64], jac: &mut [f64]) {
        jac.fill(0.0);
    }

    fn dim(&self) -> Option<usize> {
        Some(self.value.len())
    }

    fn name(&self) -> String {
        "constant".into()
    }
}

/// `g(s, x) = lambda * x`. Unbounded, so the declared bound is infinite.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub lambda: f64,
}

impl Linear {
    pub fn field(lambda: f64) -> Field {
        Arc::new(Self { lambda })
    }
}

impl CoefficientField for Linear {
    fn evaluate(&self, _s: f64, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda * xi;
        }
    }

    fn sup_bound(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, x: &[f64], jac: &mut [f64]) {
        diagonal(jac, x.len(), |_| self.lambda);
    }

    fn name(&self) -> String {
        "linear_x".into()
    }
}

/// Componentwise `sign(x)`, with `sign(0) = 0`. Not differentiable.
#[derive(Debug, Clone, Copy)]
pub struct Sign;

impl Sign {
    pub fn field() -> Field {
        Arc::new(Self)
    }
}

impl CoefficientField for Sign {
    fn evaluate(&self, _s: f64, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = if *xi > 0.0 {
                1.0
            } else if *xi < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    }

    fn sup_bound(&self) -> f64 {
        1.0
    }

    fn name(&self) -> String {
        "sign_x".into()
    }
}

/// Componentwise `amplitude * cos(x)`.
#[derive(Debug, Clone, Copy)]
pub struct Cosine {
    pub amplitude: f64,
}

impl Cosine {
    pub fn field(amplitude: f64) -> Field {
        Arc::new(Self { amplitude })
    }
}

impl CoefficientField for Cosine {
    fn evaluate(&self, _s: f64, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.amplitude * xi.cos();
        }
    }

    fn sup_bound(&self) -> f64 {
        self.amplitude.abs()
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, x: &[f64], jac: &mut [f64]) {
        diagonal(jac, x.len(), |c| -self.amplitude * x[c].sin());
    }

    fn name(&self) -> String {
        "cos_x".into()
    }
}

/// `scale * g(s, x)`.
#[derive(Debug, Clone)]
pub struct Scaled {
    scale: f64,
    inner: Field,
}

impl Scaled {
    pub fn field(scale: f64, inner: Field) -> Field {
        Arc::new(Self { scale, inner })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl CoefficientField for Scaled {
    fn evaluate(&self, s: f64, x: &[f64], out: &mut [f64]) {
        self.inner.evaluate(s, x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn sup_bound(&self) -> f64 {
        let b = self.inner.sup_bound();
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale.abs() * b
        }
    }

    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }

    fn jacobian(&self, s: f64, x: &[f64], jac: &mut [f64]) {
        self.inner.jacobian(s, x, jac);
        jac.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    fn name(&self) -> String {
        format!("{}*{}", self.scale, self.inner.name())
    }
}

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Field defined by closures, for ad-hoc and randomised kernels.
pub struct FnField {
    name: String,
    sup_bound: f64,
    eval: Box<EvalFn>,
    jac: Option<Box<EvalFn>>,
}

impl FnField {
    pub fn new(
        name: impl Into<String>,
        sup_bound: f64,
        eval: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            sup_bound,
            eval: Box::new(eval),
            jac: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }

    pub fn into_field(self) -> Field {
        Arc::new(self)
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .field("has_gradient", &self.jac.is_some())
            .finish()
    }
}

impl CoefficientField for FnField {
    fn evaluate(&self, s: f64, x: &[f64], out: &mut [f64]) {
        (self.eval)(s, x, out)
    }

    fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    fn has_gradient(&self) -> bool {
        self.jac.is_some()
    }

    fn jacobian(&self, s: f64, x: &[f64], jac: &mut [f64]) {
        match &self.jac {
            Some(j) => j(s, x, jac),
            None => unimplemented!("{} has no spatial gradient", self.name),
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

fn diagonal(jac: &mut [f64], d: usize, entry: impl Fn(usize) -> f64) {
    jac.fill(0.0);
    for c in 0..d {
        jac[c * d + c] = entry(c);
    }
}

/// Central finite-difference Jacobian of `field` at `(s, x)`, row-major.
pub fn finite_difference_jacobian(field: &dyn CoefficientField, s: f64, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let mut jac = vec![0.0; d * d];
    let mut xp = x.to_vec();
    let mut up = vec![0.0; d];
    let mut dn = vec![0.0; d];
    for k in 0..d {
        xp[k] = x[k] + h;
        field.evaluate(s, &xp, &mut up);
        xp[k] = x[k] - h;
        field.evaluate(s, &xp, &mut dn);
        xp[k] = x[k];
        for c in 0..d {
            jac[c * d + k] = (up[c] - dn[c]) / (2.0 * h);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe_points() -> Vec<(f64, Vec<f64>)> {
        (0..12)
            .map(|i| {
                let a = i as f64 * 0.37 - 2.0;
                (i as f64 * 0.05, vec![a, 0.5 - 0.8 * a])
            })
            .collect()
    }

    #[test]
    fn builtin_fields_respect_sup_bounds() {
        let fields: Vec<Field> = vec![
            Constant::field(vec![0.3, -1.2]),
            Cosine::field(0.7),
            Sign::field(),
            Scaled::field(-2.0, Cosine::field(1.0)),
        ];
        let mut out = vec![0.0; 2];
        for f in &fields {
            for (s, x) in probe_points() {
                f.evaluate(s, &x, &mut out);
                let norm = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(norm <= f.sup_bound() + 1e-15, "{}", f.name());
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let fields: Vec<Field> = vec![
            Constant::field(vec![0.3, -1.2]),
            Cosine::field(0.7),
            Linear::field(1.5),
            Scaled::field(3.0, Cosine::field(1.0)),
        ];
        let mut jac = vec![0.0; 4];
        for f in &fields {
            assert!(f.has_gradient());
            for (s, x) in probe_points() {
                f.jacobian(s, &x, &mut jac);
                let fd = finite_difference_jacobian(f.as_ref(), s, &x, 1e-5);
                for (a, b) in jac.iter().zip(&fd) {
                    let scale = a.abs().max(1e-3);
                    assert!((a - b).abs() / scale <= 1e-4, "{}: {a} vs {b}", f.name());
                }
            }
        }
    }

    #[test]
    fn sign_convention_at_zero() {
        let mut out = [9.0; 3];
        Sign.evaluate(0.0, &[-0.1, 0.0, 2.0], &mut out);
        assert_eq!(out, [-1.0, 0.0, 1.0]);
        assert!(!Sign.has_gradient());
    }
}
