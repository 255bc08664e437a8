//! Plain-text simulation config: one `key = value` per line, `#` starts a
//! comment.
//!
//! ```text
//! prior = uniform -3 3
//! sigma = 1
//! n_max = 20000
//! checkpoints = log          # or an explicit list: 10, 100, 1000
//! trials = 500
//! beta = 0.8
//! schemes = sgd, bayes, empirical_mean
//! seed = 1
//! ```
//!
//! `prior` and `n_max` are required. The other keys are `grid_m`, `theta0`,
//! `averaging` (`post` or `pre`), `burn_in`, `bayes_cap` and `tail_mass`.

use std::path::Path;
use std::str::FromStr;

use crate::encoders::Averaging;
use crate::error::{Error, Result};
use crate::posterior::PriorSpec;
use crate::sim::{default_checkpoints, Scheme, SimConfig};

const KEYS: [&str; 14] = [
    "prior",
    "sigma",
    "n_max",
    "checkpoints",
    "trials",
    "beta",
    "grid_m",
    "schemes",
    "seed",
    "theta0",
    "averaging",
    "burn_in",
    "bayes_cap",
    "tail_mass",
];

pub fn load(path: &Path) -> Result<SimConfig> {
    parse(&read(path)?)
}

/// Reads a config without validating it, so that overrides can be applied
/// first.
pub fn load_unchecked(path: &Path) -> Result<SimConfig> {
    parse_unchecked(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses and validates a config.
pub fn parse(text: &str) -> Result<SimConfig> {
    let config = parse_unchecked(text)?;
    config.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let key = if name == "master_seed" { "seed" } else { name };
            let line = text
                .lines()
                .position(|l| l.split('=').next().map(str::trim) == Some(key))
                .map_or(0, |i| i + 1);
            Error::Config {
                line,
                key: key.into(),
                reason,
            }
        }
        other => other,
    })?;
    Ok(config)
}

pub fn parse_unchecked(text: &str) -> Result<SimConfig> {
    let mut entries: Vec<(usize, &str, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            key: line.to_string(),
            reason: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Config {
                line: line_no,
                key: key.into(),
                reason: "unknown key".into(),
            });
        }
        if let Some(&(first, ..)) = entries.iter().find(|e| e.1 == key) {
            return Err(Error::Config {
                line: line_no,
                key: key.into(),
                reason: format!("already set on line {first}"),
            });
        }
        entries.push((line_no, key, value));
    }

    let find = |key: &str| entries.iter().find(|e| e.1 == key).copied();
    let missing = |key: &str| Error::Config {
        line: 0,
        key: key.into(),
        reason: "required key is missing".into(),
    };
    let prior_entry = find("prior").ok_or_else(|| missing("prior"))?;
    let n_max_entry = find("n_max").ok_or_else(|| missing("n_max"))?;
    let prior: PriorSpec = value_of(prior_entry, prior_entry.2)?;
    let n_max: u64 = value_of(n_max_entry, n_max_entry.2)?;
    let mut config = SimConfig::new(prior, 1.0, n_max);

    for &(line, key, value) in &entries {
        let entry = (line, key, value);
        match key {
            "sigma" => config.sigma = value_of(entry, value)?,
            "trials" => config.trials = value_of(entry, value)?,
            "beta" => config.beta = value_of(entry, value)?,
            "grid_m" => config.grid_m = value_of(entry, value)?,
            "seed" => config.master_seed = value_of(entry, value)?,
            "theta0" => config.theta0 = value_of(entry, value)?,
            "burn_in" => config.burn_in = value_of(entry, value)?,
            "bayes_cap" => config.bayes_cap = value_of(entry, value)?,
            "tail_mass" => config.tail_mass = value_of(entry, value)?,
            "averaging" => {
                config.averaging = match value {
                    "post" => Averaging::PostUpdate,
                    "pre" => Averaging::PreUpdate,
                    _ => return Err(bad(entry, "expected `post` or `pre`")),
                }
            }
            "schemes" => {
                let mut schemes = list(value)
                    .map(|s| s.parse::<Scheme>())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| bad(entry, e))?;
                schemes.sort();
                schemes.dedup();
                config.schemes = schemes;
            }
            "checkpoints" => {
                config.checkpoints = if value == "log" {
                    default_checkpoints(n_max)
                } else {
                    list(value)
                        .map(|s| s.parse::<u64>().map_err(|e| bad(entry, format!("`{s}`: {e}"))))
                        .collect::<Result<_>>()?
                };
            }
            _ => {}
        }
    }
    Ok(config)
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split([',', ' ', '\t']).map(str::trim).filter(|s| !s.is_empty())
}

fn bad(entry: (usize, &str, &str), reason: impl ToString) -> Error {
    Error::Config {
        line: entry.0,
        key: entry.1.into(),
        reason: reason.to_string(),
    }
}

fn value_of<T>(entry: (usize, &str, &str), value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| bad(entry, format!("`{value}`: {e}")))
}
