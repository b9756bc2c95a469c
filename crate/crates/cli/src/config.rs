//! The flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every key
//! below is recognised; anything else is an error.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `n_points` | even integer ≥ 8 | required |
//! | `alpha` | float in (1, 3] | required |
//! | `equation` | `full` or `paralinear` | required |
//! | `init` | `cos1`, `cossin`, `gaussian`, `random` | required |
//! | `amplitude` | float | required |
//! | `t_end` | float | required |
//! | `B` | float ≥ 0 | 8 |
//! | `b` | float | 2 |
//! | `dt` | float | `0.5·(N/2)^{−α}·2π` |
//! | `stride` | integer ≥ 1 | 10 |
//! | `adaptive` | bool | false |
//! | `dealias` | bool | true |
//! | `s` | float | 2 |
//! | `seed` | integer | 0 |
//! | `random_band` | integer ≥ 1 | 8 |
//! | `epsilon` | float | 0.05 |
//! | `j_max` | integer | 8 |
//! | `s_probes` | float list | `0, 1, 2` |
//! | `scan_alphas` | float list | `1.05, 1.2, 1.5` |
//! | `scan_amplitudes` | float list | `0.001, 0.01, 0.1, 1` |
//! | `scan_resolutions` | integer list | `512, 1024` |
//! | `scan_interval` | float | 0.01 |

use std::collections::BTreeMap;
use std::path::Path;

use paraburgers::solver::{default_dt, Equation, InitialCondition, SimConfig};
use paraburgers::symbols::Cutoff;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key '{key}' expects {expected}, found '{found}'")]
    TypeError {
        key: String,
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("missing required key '{key}' (end of input at line {line})")]
    MissingRequired { key: String, line: usize },
    #[error("key '{key}' set twice, on lines {first} and {second}")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("line {line}: expected 'key = value', found '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: {message}")]
    OutOfRange { key: String, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Copy)]
enum Kind {
    Float,
    Int,
    Bool,
    Word(&'static [&'static str]),
    FloatList,
    IntList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Float => "a number",
            Kind::Int => "a non-negative integer",
            Kind::Bool => "true or false",
            Kind::Word(_) => "one of the listed words",
            Kind::FloatList => "a comma-separated list of numbers",
            Kind::IntList => "a comma-separated list of integers",
        }
    }
}

const EQUATIONS: &[&str] = &["full", "paralinear"];
const INITS: &[&str] = &["cos1", "cossin", "gaussian", "random"];

/// Recognised keys, whether each is required, and its type.
const KEYS: &[(&str, bool, Kind)] = &[
    ("n_points", true, Kind::Int),
    ("alpha", true, Kind::Float),
    ("equation", true, Kind::Word(EQUATIONS)),
    ("init", true, Kind::Word(INITS)),
    ("amplitude", true, Kind::Float),
    ("t_end", true, Kind::Float),
    ("B", false, Kind::Float),
    ("b", false, Kind::Float),
    ("dt", false, Kind::Float),
    ("stride", false, Kind::Int),
    ("adaptive", false, Kind::Bool),
    ("dealias", false, Kind::Bool),
    ("s", false, Kind::Float),
    ("seed", false, Kind::Int),
    ("random_band", false, Kind::Int),
    ("epsilon", false, Kind::Float),
    ("j_max", false, Kind::Int),
    ("s_probes", false, Kind::FloatList),
    ("scan_alphas", false, Kind::FloatList),
    ("scan_amplitudes", false, Kind::FloatList),
    ("scan_resolutions", false, Kind::IntList),
    ("scan_interval", false, Kind::Float),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    Word(String),
    FloatList(Vec<f64>),
    IntList(Vec<u64>),
}

/// A parsed configuration: the simulation settings plus the experiment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Sobolev index of the energy study.
    pub s: f64,
    /// Smallness threshold of the nonlinear gauge.
    pub epsilon: f64,
    /// Term limit of the time-dependent gauge series.
    pub j_max: usize,
    pub s_probes: Vec<f64>,
    pub scan_alphas: Vec<f64>,
    pub scan_amplitudes: Vec<f64>,
    pub scan_resolutions: Vec<usize>,
    pub scan_interval: f64,
    /// `key=value` lines, sorted by key, with whitespace and comments removed.
    pub canonical: String,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut seen: BTreeMap<&str, (usize, Value, String)> = BTreeMap::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: body.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(&(name, _, kind)) = KEYS.iter().find(|(name, _, _)| *name == k) else {
            return Err(ConfigError::UnknownKey { key: k.to_string(), line });
        };
        if let Some((first, _, _)) = seen.get(name) {
            return Err(ConfigError::DuplicateKey {
                key: name.to_string(),
                first: *first,
                second: line,
            });
        }
        let value = parse_value(name, line, kind, v)?;
        seen.insert(name, (line, value, v.to_string()));
    }
    for (name, required, _) in KEYS {
        if *required && !seen.contains_key(name) {
            return Err(ConfigError::MissingRequired {
                key: name.to_string(),
                line: last_line,
            });
        }
    }
    build(&seen)
}

fn parse_value(key: &str, line: usize, kind: Kind, v: &str) -> Result<Value, ConfigError> {
    let bad = || ConfigError::TypeError {
        key: key.to_string(),
        line,
        expected: kind.describe(),
        found: v.to_string(),
    };
    let float = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    let int = |s: &str| s.trim().parse::<u64>().ok();
    match kind {
        Kind::Float => float(v).map(Value::Float).ok_or_else(bad),
        Kind::Int => int(v).map(Value::Int).ok_or_else(bad),
        Kind::Bool => v.parse::<bool>().map(Value::Bool).map_err(|_| bad()),
        Kind::Word(words) => words
            .iter()
            .find(|w| **w == v)
            .map(|w| Value::Word(w.to_string()))
            .ok_or_else(bad),
        Kind::FloatList => v
            .split(',')
            .map(float)
            .collect::<Option<Vec<_>>>()
            .map(Value::FloatList)
            .ok_or_else(bad),
        Kind::IntList => v
            .split(',')
            .map(int)
            .collect::<Option<Vec<_>>>()
            .map(Value::IntList)
            .ok_or_else(bad),
    }
}

fn build(seen: &BTreeMap<&str, (usize, Value, String)>) -> Result<RunConfig, ConfigError> {
    let line = |k: &str| seen.get(k).map_or(0, |e| e.0);
    let range = |k: &str, message: String| ConfigError::OutOfRange {
        key: k.to_string(),
        line: line(k),
        message,
    };
    let float = |k: &str, d: f64| match seen.get(k) {
        Some((_, Value::Float(x), _)) => *x,
        _ => d,
    };
    let int = |k: &str, d: u64| match seen.get(k) {
        Some((_, Value::Int(x), _)) => *x,
        _ => d,
    };
    let flag = |k: &str, d: bool| match seen.get(k) {
        Some((_, Value::Bool(x), _)) => *x,
        _ => d,
    };
    let word = |k: &str| match seen.get(k) {
        Some((_, Value::Word(w), _)) => w.clone(),
        _ => String::new(),
    };
    let floats = |k: &str, d: &[f64]| match seen.get(k) {
        Some((_, Value::FloatList(x), _)) => x.clone(),
        _ => d.to_vec(),
    };

    let n_points = int("n_points", 0) as usize;
    if n_points < 8 || n_points % 2 != 0 {
        return Err(range("n_points", format!("n_points must be even and at least 8, got {n_points}")));
    }
    let alpha = float("alpha", 0.0);
    if !(alpha > 1.0 && alpha <= 3.0) {
        return Err(range("alpha", format!("alpha must lie in (1, 3], got {alpha}")));
    }
    let cutoff = Cutoff::new(float("B", 8.0), float("b", 2.0)).map_err(|e| range("B", e.to_string()))?;
    let equation: Equation = word("equation").parse().map_err(|e: paraburgers::Error| range("equation", e.to_string()))?;
    let band = int("random_band", 8) as i64;
    if band < 1 {
        return Err(range("random_band", "random_band must be at least 1".into()));
    }
    let init = match word("init").as_str() {
        "random" => InitialCondition::Random { band },
        w => w.parse().map_err(|e: paraburgers::Error| range("init", e.to_string()))?,
    };
    let t_end = float("t_end", 0.0);
    let dt = float("dt", default_dt(n_points, alpha));
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(range("t_end", format!("need 0 < dt <= t_end, got dt {dt} and t_end {t_end}")));
    }
    let stride = int("stride", 10) as usize;
    if stride == 0 {
        return Err(range("stride", "stride must be at least 1".into()));
    }
    let s = float("s", 2.0);
    let sim = SimConfig {
        n_points,
        alpha,
        cutoff,
        equation,
        dt,
        t_end,
        dealias: flag("dealias", true),
        initial_condition: init,
        amplitude: float("amplitude", 0.0),
        seed: int("seed", 0),
        stride,
        adaptive: flag("adaptive", false),
        sobolev_indices: vec![s],
        linear_only: false,
    };
    let scan_resolutions = match seen.get("scan_resolutions") {
        Some((_, Value::IntList(x), _)) => x.iter().map(|&v| v as usize).collect(),
        _ => vec![512, 1024],
    };
    let scan_interval = float("scan_interval", 0.01);
    if !(scan_interval > 0.0) {
        return Err(range("scan_interval", "scan_interval must be positive".into()));
    }
    let canonical = seen
        .iter()
        .map(|(k, (_, _, raw))| format!("{k}={}", canonical_value(raw)))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RunConfig {
        sim,
        s,
        epsilon: float("epsilon", 0.05),
        j_max: int("j_max", 8) as usize,
        s_probes: floats("s_probes", &[0.0, 1.0, 2.0]),
        scan_alphas: floats("scan_alphas", &[1.05, 1.2, 1.5]),
        scan_amplitudes: floats("scan_amplitudes", &[1e-3, 1e-2, 0.1, 1.0]),
        scan_resolutions,
        scan_interval,
        canonical,
    })
}

fn canonical_value(raw: &str) -> String {
    raw.split(',').map(str::trim).collect::<Vec<_>>().join(",")
}
