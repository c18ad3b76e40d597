//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::CliError;

/// Studies exposed by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    GirsanovCheck,
    OracleCompare,
    DerivativeCheck,
    CauchyCheck,
    MollifyStudy,
    HolderStudy,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Solve,
        Command::GirsanovCheck,
        Command::OracleCompare,
        Command::DerivativeCheck,
        Command::CauchyCheck,
        Command::MollifyStudy,
        Command::HolderStudy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::GirsanovCheck => "girsanov-check",
            Command::OracleCompare => "oracle-compare",
            Command::DerivativeCheck => "derivative-check",
            Command::CauchyCheck => "cauchy-check",
            Command::MollifyStudy => "mollify-study",
            Command::HolderStudy => "holder-study",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}

/// Every key the runner understands. Anything else is rejected so typos do
/// not silently fall back to defaults.
const KNOWN_KEYS: &[&str] = &[
    "command",
    // shared
    "kernel",
    "T",
    "N",
    "d",
    "x",
    "seed",
    "n_paths",
    "phi",
    "levels",
    "t_index",
    "z",
    // kernel parameters
    "c",
    "lambda",
    "amplitude",
    "field",
    "k_max",
    "alpha",
    "n_max",
    "exponents",
    "fields",
    "scales",
    // solve
    "noise",
    "path_index",
    "scheme",
    "stride",
    "max_iters",
    "tol",
    // girsanov-check
    "ess_min",
    // derivative-check
    "h",
    "rel_tol",
    "fraction_min",
    // cauchy-check
    "f",
    "k",
    "expected_order",
    "order_tol",
    "residual_max",
    // mollify-study
    "quad_points",
    // holder-study
    "pair_exponents",
    "bootstrap",
    "confidence",
];

/// Parsed configuration: the command plus raw string values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `text`; a `command` key, if present, must agree with `command`.
    pub fn parse(command: Command, text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        if let Some(c) = values.remove("command") {
            let named: Command = c.parse()?;
            if named != command {
                return Err(CliError::Config(format!(
                    "config is for `{named}` but `{command}` was requested"
                )));
            }
        }
        Ok(Self { command, values })
    }

    pub fn from_file(command: Command, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(command, &text)
    }

    /// Sets or replaces a value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) || key == "command" {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("cannot parse `{key}` = `{v}`")))
            })
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list; `None` when the key is absent.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse()
                            .map_err(|_| CliError::Config(format!("cannot parse `{item}` in `{key}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// `on`/`off` switch.
    pub fn switch(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("on" | "true" | "1") => Ok(true),
            Some("off" | "false" | "0") => Ok(false),
            Some(v) => Err(CliError::Config(format!("`{key}` must be on or off, got `{v}`"))),
        }
    }
}
