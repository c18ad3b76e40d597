//! Kernel presets addressable by name.
//!
//! | preset       | drift                                   | keys                                 |
//! |--------------|-----------------------------------------|--------------------------------------|
//! | `empty`      | `0`                                     |                                      |
//! | `constant`   | `c`                                     | `c` (default 1, broadcast)           |
//! | `linear_x`   | `lambda x`                              | `lambda` (default 1)                 |
//! | `sign_x`     | `sign(x)`                               |                                      |
//! | `cos_x`      | `amplitude cos(x)`                      | `amplitude` (default 1)              |
//! | `sin_kernel` | `sin(t - s) g(x)` truncated             | `field`, `k_max` (default 8)         |
//! | `fractional` | `(t - s)^alpha g(x)` expanded about 1   | `field`, `alpha`, `n_max`            |
//! | `poly`       | `sum_i scale_i (t - s)^{m_i} g_i(x)`    | `exponents`, `fields`, `scales`      |
//!
//! `field` and the entries of `fields` name one of the four single-field
//! presets and default to `cos_x`.

use crate::kernel::{fractional_kernel, sin_kernel, Constant, Cosine, Field, KernelSeries, Linear, Scaled, Sign};

use super::config::ExperimentConfig;
use super::CliError;

pub const PRESETS: &[&str] = &[
    "empty",
    "constant",
    "linear_x",
    "sign_x",
    "cos_x",
    "sin_kernel",
    "fractional",
    "poly",
];

/// Builds a single coefficient field by preset name.
pub fn field(name: &str, cfg: &ExperimentConfig, d: usize) -> Result<Field, CliError> {
    Ok(match name {
        "constant" => {
            let c: Vec<f64> = cfg.list("c")?.unwrap_or_else(|| vec![1.0]);
            let value = match c.len() {
                1 => vec![c[0]; d],
                n if n == d => c,
                n => {
                    return Err(CliError::Config(format!("`c` has {n} entries but d = {d}")));
                }
            };
            Constant::field(value)
        }
        "linear_x" => Linear::field(cfg.get("lambda", 1.0)?),
        "sign_x" => Sign::field(),
        "cos_x" => Cosine::field(cfg.get("amplitude", 1.0)?),
        other => {
            return Err(CliError::Config(format!(
                "unknown field `{other}` (expected constant, linear_x, sign_x or cos_x)"
            )))
        }
    })
}

/// Builds the kernel named by the `kernel` key (default `empty`) on `[0, horizon]`.
pub fn kernel(cfg: &ExperimentConfig, horizon: f64, d: usize) -> Result<KernelSeries, CliError> {
    let name = cfg.str_or("kernel", "empty");
    let single = |f: Field| -> Result<KernelSeries, CliError> { Ok(KernelSeries::new(horizon)?.with_term(0, f)?) };
    match name {
        "empty" => Ok(KernelSeries::new(horizon)?),
        "constant" | "linear_x" | "sign_x" | "cos_x" => single(field(name, cfg, d)?),
        "sin_kernel" => {
            let g = field(cfg.str_or("field", "cos_x"), cfg, d)?;
            Ok(sin_kernel(g, cfg.get("k_max", 8)?, horizon)?)
        }
        "fractional" => {
            let g = field(cfg.str_or("field", "cos_x"), cfg, d)?;
            Ok(fractional_kernel(
                cfg.get("alpha", -0.4)?,
                g,
                cfg.get("n_max", 200)?,
                horizon,
            )?)
        }
        "poly" => {
            let exponents: Vec<u32> = cfg
                .list("exponents")?
                .ok_or_else(|| CliError::Config("`poly` needs an `exponents` list".into()))?;
            let names: Vec<String> = cfg.list("fields")?.unwrap_or_else(|| vec!["cos_x".to_string()]);
            let scales: Vec<f64> = cfg.list("scales")?.unwrap_or_else(|| vec![1.0]);
            let pick = |v: usize, what: &str, i: usize| -> Result<usize, CliError> {
                match v {
                    1 => Ok(0),
                    n if n == exponents.len() => Ok(i),
                    n => Err(CliError::Config(format!(
                        "`{what}` has {n} entries for {} exponents",
                        exponents.len()
                    ))),
                }
            };
            let mut k = KernelSeries::new(horizon)?;
            for (i, &m) in exponents.iter().enumerate() {
                let g = field(&names[pick(names.len(), "fields", i)?], cfg, d)?;
                let scale = scales[pick(scales.len(), "scales", i)?];
                let g = if scale == 1.0 { g } else { Scaled::field(scale, g) };
                k = k.with_term(m, g)?;
            }
            Ok(k)
        }
        other => Err(CliError::Config(format!(
            "unknown kernel preset `{other}` (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}
