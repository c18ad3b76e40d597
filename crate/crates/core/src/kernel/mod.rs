//! Power-series Volterra kernels `b(t, s, x) = sum_m (t - s)^m g_m(s, x)`.

pub mod field;
mod precise;
mod quadrature;
mod series;

pub use field::{finite_difference_jacobian, CoefficientField, Constant, Cosine, Field, FnField, Linear, Scaled, Sign};
pub use precise::PrecisePolynomial;
pub use quadrature::{cauchy_check, convolution_quadrature, iterated_integral, GridFunction};
pub use series::{eval_kernel, fractional_kernel, sin_kernel, KernelSeries, KernelTerm, PolynomialProfile};
