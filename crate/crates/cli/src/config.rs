//! Run configuration: a flat `key = value` file overlaid by command-line flags.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mimetic_swe::testcases::TestCaseId;
use thiserror::Error;

/// Environment variable read for the worker thread count when no flag or
/// config key sets it.
pub const THREADS_ENV: &str = "MIMETIC_SWE_THREADS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
}

/// Biharmonic coefficient setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity {
    /// `0.0718 Δx^3.2`.
    Auto,
    Fixed(f64),
}

/// All parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub testcase: TestCaseId,
    pub p: usize,
    pub ne: usize,
    /// Time step in seconds.
    pub dt: f64,
    /// Simulated duration in days.
    pub days: f64,
    /// Flow angle of tc2 (radians).
    pub alpha: f64,
    /// `None` selects the test case default: off for tc2 and rest, auto otherwise.
    pub c0: Option<Viscosity>,
    pub output: PathBuf,
    /// Steps between snapshots; 0 writes only the first and last state.
    pub snapshot_interval: usize,
    /// Steps between monitor rows and log lines.
    pub monitor_interval: usize,
    /// Write each shared GLL point once in snapshots.
    pub dedup_snapshots: bool,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Worker threads; `None` leaves the choice to the environment.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            testcase: TestCaseId::Tc2,
            p: 3,
            ne: 4,
            dt: 240.0,
            days: 1.0,
            alpha: FRAC_PI_4,
            c0: None,
            output: PathBuf::from("output"),
            snapshot_interval: 0,
            monitor_interval: 1,
            dedup_snapshots: false,
            solver_tol: 1e-12,
            solver_max_iter: 500,
            threads: None,
        }
    }
}

/// Recognised keys, in echo order.
pub const KEYS: &[&str] = &[
    "testcase",
    "p",
    "ne",
    "dt",
    "days",
    "alpha",
    "c0",
    "output",
    "snapshot_interval",
    "monitor_interval",
    "dedup_snapshots",
    "solver_tol",
    "solver_max_iter",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: impl ToString, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

impl SimConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "testcase" => self.testcase = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "ne" => self.ne = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "days" => self.days = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "c0" => {
                self.c0 = Some(if value.eq_ignore_ascii_case("auto") {
                    Viscosity::Auto
                } else {
                    Viscosity::Fixed(parse(key, value)?)
                })
            }
            "output" => self.output = PathBuf::from(value),
            "snapshot_interval" => self.snapshot_interval = parse(key, value)?,
            "monitor_interval" => self.monitor_interval = parse(key, value)?,
            "dedup_snapshots" => self.dedup_snapshots = parse(key, value)?,
            "solver_tol" => self.solver_tol = parse(key, value)?,
            "solver_max_iter" => self.solver_max_iter = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_str(&text, &path.display().to_string())
    }

    /// Applies config text; `origin` is used in error messages.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: origin.into(),
                line: n + 1,
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Checks the invariants, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", self.dt, "must be positive and finite"));
        }
        if !(self.days > 0.0 && self.days.is_finite()) {
            return Err(invalid("days", self.days, "must be positive and finite"));
        }
        if self.ne < 1 {
            return Err(invalid("ne", self.ne, "must be at least 1"));
        }
        if !(1..=16).contains(&self.p) {
            return Err(invalid("p", self.p, "must lie in 1..=16"));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha", self.alpha, "must be finite"));
        }
        if let Some(Viscosity::Fixed(c)) = self.c0 {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(invalid("c0", c, "must be non-negative, or `auto`"));
            }
        }
        if self.monitor_interval < 1 {
            return Err(invalid("monitor_interval", self.monitor_interval, "must be at least 1"));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(invalid("solver_tol", self.solver_tol, "must lie in (0, 1)"));
        }
        if self.solver_max_iter < 1 {
            return Err(invalid("solver_max_iter", self.solver_max_iter, "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", 0, "must be at least 1"));
        }
        Ok(())
    }

    /// Number of time steps covering the duration.
    pub fn steps(&self) -> usize {
        (self.days * 86_400.0 / self.dt).round().max(1.0) as usize
    }

    /// Effective viscosity setting after applying the test case default.
    pub fn viscosity(&self) -> Viscosity {
        self.c0.unwrap_or(match self.testcase {
            TestCaseId::Rest | TestCaseId::Tc2 => Viscosity::Fixed(0.0),
            TestCaseId::Tc6 | TestCaseId::Galewsky => Viscosity::Auto,
        })
    }

    /// Renders the configuration in the file format, with the resolved
    /// viscosity coefficient appended as a comment.
    pub fn echo(&self, resolved_c0: f64) -> String {
        let mut s = String::new();
        let c0 = match self.viscosity() {
            Viscosity::Auto => "auto".to_string(),
            Viscosity::Fixed(c) => format!("{c:.16e}"),
        };
        let threads = self.threads.map_or("default".to_string(), |t| t.to_string());
        for (k, v) in [
            ("testcase", self.testcase.to_string()),
            ("p", self.p.to_string()),
            ("ne", self.ne.to_string()),
            ("dt", format!("{:.16e}", self.dt)),
            ("days", format!("{:.16e}", self.days)),
            ("alpha", format!("{:.16e}", self.alpha)),
            ("c0", c0),
            ("output", self.output.display().to_string()),
            ("snapshot_interval", self.snapshot_interval.to_string()),
            ("monitor_interval", self.monitor_interval.to_string()),
            ("dedup_snapshots", self.dedup_snapshots.to_string()),
            ("solver_tol", format!("{:.16e}", self.solver_tol)),
            ("solver_max_iter", self.solver_max_iter.to_string()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "# threads = {threads}");
        let _ = writeln!(s, "# resolved c0 = {resolved_c0:.16e}");
        s
    }
}

/// Parses a sweep specification such as `ne=4,8,16`.
pub fn parse_sweep(spec: &str) -> Result<Vec<usize>, ConfigError> {
    let (key, list) = spec
        .split_once('=')
        .ok_or_else(|| invalid("sweep", spec, "expected `ne=<n1>,<n2>,...`"))?;
    if key.trim() != "ne" {
        return Err(invalid("sweep", spec, "only `ne` can be swept"));
    }
    let values = list
        .split(',')
        .map(|v| parse::<usize>("sweep", v.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() < 2 {
        return Err(invalid("sweep", spec, "needs at least two resolutions"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) || values[0] == 0 {
        return Err(invalid("sweep", spec, "resolutions must be positive and increasing"));
    }
    Ok(values)
}
