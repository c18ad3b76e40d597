use std::fmt;
use std::sync::Arc;

use super::field::{Field, Scaled};
use super::precise::PrecisePolynomial;
use crate::error::{invalid, Result, SvdeError};

/// One term `(t - s)^exponent * g(s, x)`.
#[derive(Clone)]
pub struct KernelTerm {
    pub exponent: u32,
    pub field: Field,
}

impl fmt::Debug for KernelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t-s)^{} * {}", self.exponent, self.field.name())
    }
}

/// Kernel of the form `p(t - s) * g(s, x)` where `p` is a polynomial that is
/// too badly conditioned to evaluate term by term in floating point.
#[derive(Debug, Clone)]
pub struct PolynomialProfile {
    pub polynomial: PrecisePolynomial,
    pub field: Field,
}

/// Volterra drift `b(t, s, x) = sum_m (t - s)^m g_m(s, x)` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    terms: Vec<KernelTerm>,
    horizon: f64,
    profile: Option<Arc<PolynomialProfile>>,
}

impl KernelSeries {
    /// Empty series (zero drift).
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("T", format!("kernel horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            terms: Vec::new(),
            horizon,
            profile: None,
        })
    }

    /// Builds a series from `(exponent, field)` pairs in any order.
    pub fn from_terms(horizon: f64, terms: impl IntoIterator<Item = (u32, Field)>) -> Result<Self> {
        let mut k = Self::new(horizon)?;
        for (m, g) in terms {
            k.push_term(m, g)?;
        }
        Ok(k)
    }

    /// Adds a term, keeping exponents sorted. Duplicate exponents are rejected.
    pub fn with_term(mut self, exponent: u32, field: Field) -> Result<Self> {
        self.push_term(exponent, field)?;
        Ok(self)
    }

    fn push_term(&mut self, exponent: u32, field: Field) -> Result<()> {
        match self.terms.binary_search_by_key(&exponent, |t| t.exponent) {
            Ok(_) => Err(invalid("exponents", format!("exponent {exponent} appears twice"))),
            Err(pos) => {
                self.terms.insert(pos, KernelTerm { exponent, field });
                // explicit terms invalidate a shared profile
                self.profile = None;
                Ok(())
            }
        }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn max_exponent(&self) -> Option<u32> {
        self.terms.last().map(|t| t.exponent)
    }

    pub fn profile(&self) -> Option<&PolynomialProfile> {
        self.profile.as_deref()
    }

    /// `sum_m T^m ||g_m||_inf` over all terms.
    pub fn tail_bound(&self) -> f64 {
        self.partial_tail_bounds().last().copied().unwrap_or(0.0)
    }

    /// Running partial sums of `T^m ||g_m||_inf`, one per term.
    pub fn partial_tail_bounds(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.terms
            .iter()
            .map(|t| {
                let b = t.field.sup_bound();
                if b != 0.0 {
                    acc += self.horizon.powi(t.exponent as i32) * b;
                }
                acc
            })
            .collect()
    }

    pub fn has_gradients(&self) -> bool {
        self.terms.iter().all(|t| t.field.has_gradient())
    }

    pub(crate) fn require_gradients(&self) -> Result<()> {
        match self.terms.iter().find(|t| !t.field.has_gradient()) {
            Some(t) => Err(SvdeError::MissingGradient { exponent: t.exponent }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        for t in &self.terms {
            if let Some(fd) = t.field.dim() {
                if fd != d {
                    return Err(SvdeError::DimensionMismatch {
                        expected: d,
                        actual: fd,
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies `f` to every coefficient field, keeping exponents.
    pub fn map_fields(&self, mut f: impl FnMut(&Field) -> Result<Field>) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Ok(KernelTerm {
                    exponent: t.exponent,
                    field: f(&t.field)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let profile = match &self.profile {
            Some(p) => Some(Arc::new(PolynomialProfile {
                polynomial: p.polynomial.clone(),
                field: f(&p.field)?,
            })),
            None => None,
        };
        Ok(Self {
            terms,
            horizon: self.horizon,
            profile,
        })
    }

    /// Validated evaluation of `b(t, s, x)`.
    pub fn eval(&self, t: f64, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(s >= 0.0) {
            return Err(invalid("s", format!("s must be nonnegative, got {s}")));
        }
        if s > t {
            return Err(SvdeError::TimeOrder { t, s });
        }
        if t > self.horizon * (1.0 + 1e-12) {
            return Err(SvdeError::OutsideHorizon {
                t,
                horizon: self.horizon,
            });
        }
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.eval_into(t - s, s, x, &mut out);
        Ok(out)
    }

    /// `b` at lag `t - s`, without validation. `out` is overwritten.
    pub(crate) fn eval_into(&self, lag: f64, s: f64, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Some(p) = &self.profile {
            let w = p.polynomial.evaluate(lag);
            p.field.evaluate(s, x, out);
            out.iter_mut().for_each(|v| *v *= w);
            return;
        }
        let mut tmp = vec![0.0; x.len()];
        for term in &self.terms {
            term.field.evaluate(s, x, &mut tmp);
            let w = lag.powi(term.exponent as i32);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += w * v;
            }
        }
    }
}

/// `b(t, s, x)` for `0 <= s <= t <= T`.
pub fn eval_kernel(kernel: &KernelSeries, t: f64, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    kernel.eval(t, s, x)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Taylor truncation of `sin(t - s) g(s, x)` with terms up to `(t-s)^(2 k_max + 1)`.
pub fn sin_kernel(g: Field, k_max: u32, horizon: f64) -> Result<KernelSeries> {
    let mut k = KernelSeries::new(horizon)?;
    for j in 0..=k_max {
        let m = 2 * j + 1;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        k.push_term(m, Scaled::field(sign / factorial(m), g.clone()))?;
    }
    Ok(k)
}

/// Polynomial expansion of `(t - s)^alpha g(s, x)` obtained by expanding the
/// binomial series of `(1 + (t - s - 1))^alpha` up to `n_max` and regrouping
/// into powers of `t - s`. Valid for `0 < t - s < 2`, hence `T < 2`.
///
/// Evaluation routes through a fixed-point polynomial because the regrouped
/// coefficients reach `~2^n_max` in magnitude.
pub fn fractional_kernel(alpha: f64, g: Field, n_max: usize, horizon: f64) -> Result<KernelSeries> {
    if !(alpha > -0.5 && alpha < 0.0) {
        return Err(invalid("alpha", format!("alpha must lie in (-1/2, 0), got {alpha}")));
    }
    if n_max == 0 {
        return Err(invalid("n_max", "n_max must be positive"));
    }
    if !(horizon < 2.0) {
        return Err(invalid("T", format!("fractional kernel needs T < 2, got {horizon}")));
    }
    let polynomial = PrecisePolynomial::recentred_binomial(alpha, n_max);
    let mut k = KernelSeries::new(horizon)?;
    for (m, c) in polynomial.coefficients().into_iter().enumerate() {
        k.push_term(m as u32, Scaled::field(c, g.clone()))?;
    }
    k.profile = Some(Arc::new(PolynomialProfile { polynomial, field: g }));
    Ok(k)
}
