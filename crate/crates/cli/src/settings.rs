//! Flat TOML config merged under command-line flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use toml::{Table, Value};

const KNOWN: &[&str] = &[
    "input",
    "R",
    "n",
    "zeta",
    "delta",
    "mesh_h",
    "scale_s",
    "seed",
    "threads",
    "out_dir",
    "force",
    "target",
    "mode",
    "x",
    "r1",
    "r2",
    "shell_width",
    "D",
    "move_budget",
    "base_point",
    "eps_multiplier",
    "radius",
    "neighborhoods",
    "certificate",
    "collision_tol",
    "density",
    "snap",
    "bends",
    "multipliers",
    "chunked",
];

#[derive(Debug, Default)]
pub struct Settings {
    table: Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Settings::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
        for (key, value) in &table {
            if !KNOWN.contains(&key.as_str()) {
                bail!("config {}: unknown key `{key}`", path.display());
            }
            if matches!(value, Value::Table(_) | Value::Array(_)) {
                bail!("config {}: key `{key}` must be a scalar", path.display());
            }
        }
        Ok(Settings { table })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    pub fn f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(anyhow!("config key `{key}`: expected a number, got {other}")),
        }
    }

    pub fn u64(&self, flag: Option<u64>, key: &str) -> Result<Option<u64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => Err(anyhow!("config key `{key}`: expected a nonnegative integer, got {other}")),
        }
    }

    pub fn string(&self, flag: Option<String>, key: &str) -> Result<Option<String>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Float(v)) => Ok(Some(v.to_string())),
            Some(Value::Integer(v)) => Ok(Some(v.to_string())),
            Some(other) => Err(anyhow!("config key `{key}`: expected a string, got {other}")),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.get(key) {
            None => Ok(false),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(anyhow!("config key `{key}`: expected true or false, got {other}")),
        }
    }
}

/// `inf`, `none` and `unrestricted` mean no cap.
pub fn parse_zeta(raw: Option<&str>) -> Result<Option<f64>> {
    match raw.map(str::trim) {
        None => Ok(None),
        Some("inf" | "none" | "unrestricted") => Ok(None),
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| anyhow!("zeta: expected a positive number or `inf`, got `{s}`"))?;
            if !(v > 0.0) {
                bail!("zeta: must be positive, got {v}");
            }
            Ok(if v.is_infinite() { None } else { Some(v) })
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow!("{key}: cannot parse `{s}`")))
        .collect()
}
