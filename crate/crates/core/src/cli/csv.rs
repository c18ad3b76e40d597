//! CSV output with a fixed column set.

use std::fmt::Write;

pub const HEADER: &str = "command,kernel,T,N,d,n_paths,seed,metric,value,std_error,status";

/// Columns shared by every row of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub command: String,
    pub kernel: String,
    pub horizon: f64,
    pub steps: usize,
    pub dim: usize,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    /// `Some(true)` is PASS, `Some(false)` FAIL, `None` not a check.
    pub status: Option<bool>,
}

impl Row {
    pub fn value(metric: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            value,
            std_error: None,
            status: None,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn check(mut self, pass: bool) -> Self {
        self.status = Some(pass);
        self
    }
}

/// 17 significant digits.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render(ctx: &RunContext, rows: &[Row]) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            ctx.command,
            ctx.kernel,
            number(ctx.horizon),
            ctx.steps,
            ctx.dim,
            ctx.n_paths,
            ctx.seed,
            row.metric,
            number(row.value),
            row.std_error.map(number).unwrap_or_default(),
            match row.status {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "",
            }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let ctx = RunContext {
            command: "solve".into(),
            kernel: "empty".into(),
            horizon: 1.0,
            steps: 4,
            dim: 1,
            n_paths: 1,
            seed: 0,
        };
        let csv = render(
            &ctx,
            &[
                Row::value("X0[0]", 0.1),
                Row::value("ess", 2.0).with_se(0.5).check(false),
            ],
        );
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(
            lines[1],
            "solve,empty,1.0000000000000000e0,4,1,1,0,X0[0],1.0000000000000001e-1,,"
        );
        assert!(lines[2].ends_with(",2.0000000000000000e0,5.0000000000000000e-1,FAIL"));
        assert_eq!(lines[3], "");
        assert!(!csv.contains('\r'));
    }
}
