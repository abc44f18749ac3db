//! Flat key=value config files and the resolved run configuration that
//! every report embeds.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

/// Schema tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

const KNOWN_KEYS: &[&str] = &[
    "n", "beta", "beta-star", "i", "j", "seed", "sweeps", "burn-in", "chains", "out", "format",
    "kx", "km", "max-len", "samples", "proposal", "k-max", "budget-override", "quick",
];

/// A parsed key=value config file. Keys mirror the long flags; flags
/// override file entries.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!(
                    "config {}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return usage(format!(
                    "config {}:{}: unknown key {key:?} (known: {})",
                    path.display(),
                    lineno + 1,
                    KNOWN_KEYS.join(", ")
                ));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| UsageError(format!("config key {key}={raw:?}: {e}"))),
        }
    }

    pub fn get_flag(&self, key: &str) -> Result<bool, UsageError> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => usage(format!("config key {key}={other:?}: expected a boolean")),
        }
    }
}

/// Coordinates "x,y" parsed from a flag or config value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
}

impl FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| format!("expected coordinates like \"1,0\", got {s:?}"))?;
        Ok(Site {
            x: x.trim().parse().map_err(|e| format!("bad x coordinate {x:?}: {e}"))?,
            y: y.trim().parse().map_err(|e| format!("bad y coordinate {y:?}: {e}"))?,
        })
    }
}

impl Site {
    pub fn index(&self, n: usize) -> Result<usize, UsageError> {
        if self.x >= n || self.y >= n {
            return usage(format!(
                "site ({},{}) outside the {n}x{n} box (coordinates run 0..{})",
                self.x,
                self.y,
                n - 1
            ));
        }
        Ok(self.y * n + self.x)
    }
}

/// Fully resolved parameters of a run; embedded in every JSON report so a
/// run can be reproduced from its output alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<Site>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<Site>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charge_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    pub budget_override: bool,
    pub workers: usize,
    pub format: String,
}

impl RunConfig {
    pub fn new(subcommand: &str, n: usize) -> Self {
        RunConfig {
            subcommand: subcommand.to_string(),
            n,
            beta: None,
            beta_star: None,
            i: None,
            j: None,
            height_cutoff: None,
            charge_cutoff: None,
            sweeps: None,
            burn_in: None,
            seed: None,
            seeds: None,
            chains: None,
            max_len: None,
            samples: None,
            proposal: None,
            k_max: None,
            budget_override: false,
            workers: 1,
            format: "json".to_string(),
        }
    }
}

/// Resolve the pair (beta, beta*) from whichever the user supplied.
/// Exactly one may be given; the other is derived by `beta* = 1/(4 beta)`.
pub fn resolve_temperatures(
    beta: Option<f64>,
    beta_star: Option<f64>,
) -> Result<(f64, f64), UsageError> {
    match (beta, beta_star) {
        (Some(_), Some(_)) => usage(
            "--beta and --beta-star are mutually exclusive; give one and the other is derived",
        ),
        (Some(b), None) => {
            if b <= 0.0 {
                return usage(format!("--beta must be positive, got {b}"));
            }
            Ok((b, 1.0 / (4.0 * b)))
        }
        (None, Some(bs)) => {
            if bs <= 0.0 {
                return usage(format!("--beta-star must be positive, got {bs}"));
            }
            Ok((1.0 / (4.0 * bs), bs))
        }
        (None, None) => usage("set a temperature with --beta or --beta-star"),
    }
}

/// Worker cap: TORUS_COULOMB_THREADS when set, else available parallelism.
pub fn worker_cap() -> usize {
    if let Ok(raw) = std::env::var("TORUS_COULOMB_THREADS") {
        if let Ok(v) = raw.parse::<usize>() {
            return v.max(1);
        }
    }
    std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1)
}
