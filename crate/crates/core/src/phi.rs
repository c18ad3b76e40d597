use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, SvdeError};

/// Named test functions `phi: R^d -> R`. All act on the first component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `y`
    Id,
    /// `y^2`
    Square,
    /// `sin y`
    Sin,
    /// `1{y <= a}`
    IndicatorLe(f64),
    /// `clamp(y, -c, c)`
    BoundedId(f64),
    /// `1`
    One,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let y = x[0];
        match *self {
            TestFunction::Id => y,
            TestFunction::Square => y * y,
            TestFunction::Sin => y.sin(),
            TestFunction::IndicatorLe(a) => {
                if y <= a {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::BoundedId(c) => y.clamp(-c, c),
            TestFunction::One => 1.0,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Id => write!(f, "id"),
            TestFunction::Square => write!(f, "square"),
            TestFunction::Sin => write!(f, "sin"),
            TestFunction::IndicatorLe(a) => write!(f, "indicator_le({a})"),
            TestFunction::BoundedId(c) if *c == 1.0 => write!(f, "bounded_id"),
            TestFunction::BoundedId(c) => write!(f, "bounded_id({c})"),
            TestFunction::One => write!(f, "one"),
        }
    }
}

fn argument(s: &str, name: &str) -> Result<Option<f64>, SvdeError> {
    let rest = &s[name.len()..];
    if rest.is_empty() {
        return Ok(None);
    }
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| invalid("phi", format!("malformed test function `{s}`")))?;
    inner
        .trim()
        .parse()
        .map(Some)
        .map_err(|_| invalid("phi", format!("bad argument in `{s}`")))
}

impl FromStr for TestFunction {
    type Err = SvdeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "id" => Ok(TestFunction::Id),
            "square" => Ok(TestFunction::Square),
            "sin" => Ok(TestFunction::Sin),
            "one" => Ok(TestFunction::One),
            _ if s.starts_with("indicator_le") => argument(s, "indicator_le")?
                .map(TestFunction::IndicatorLe)
                .ok_or_else(|| invalid("phi", "indicator_le needs a threshold, e.g. indicator_le(0.5)")),
            _ if s.starts_with("bounded_id") => {
                let c = argument(s, "bounded_id")?.unwrap_or(1.0);
                if !(c > 0.0) {
                    return Err(invalid("phi", "bounded_id clamp must be positive"));
                }
                Ok(TestFunction::BoundedId(c))
            }
            _ => Err(invalid("phi", format!("unknown test function `{s}`"))),
        }
    }
}
