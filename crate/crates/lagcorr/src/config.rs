//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys may appear once.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lagcorr_core::allocation::Strategy;
use lagcorr_core::{Date, FieldSpec};

use crate::error::{Error, Result};

/// Parsed key-value pairs, consumed key by key so leftovers can be reported.
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", no + 1)));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", no + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|v| v.parse().map_err(|e| Error::Config(format!("{key} = {v}: {e}"))))
            .transpose()
    }

    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key).map(|v| parse_list(key, &v)).transpose()
    }

    /// Error on any key nobody asked for.
    pub fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(Error::Config(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }
}

pub(crate) fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("{key}: '{}': {e}", s.trim()))))
        .collect()
}

/// Everything a command needs; flags override the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    pub fundamentals: Option<PathBuf>,
    pub benchmarks: Option<PathBuf>,
    pub riskfree: Option<PathBuf>,
    pub synth_config: Option<PathBuf>,
    pub from: Option<Date>,
    pub to: Option<Date>,
    pub strategies: Option<Vec<Strategy>>,
    pub fields: Option<FieldSpec>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_flip: bool,
}

pub fn parse_strategies(list: &str) -> Result<Vec<Strategy>> {
    let mut out = Vec::new();
    for s in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let st: Strategy = s.parse().map_err(|e| Error::Config(format!("strategies: {e}")))?;
        if !out.contains(&st) {
            out.push(st);
        }
    }
    if out.is_empty() {
        return Err(Error::config("strategies: empty list"));
    }
    Ok(out)
}

pub fn parse_fields(list: &str) -> Result<FieldSpec> {
    FieldSpec::parse(list).map_err(|e| Error::Config(format!("fields: {e}")))
}

pub fn parse_date(key: &str, v: &str) -> Result<Date> {
    v.parse().map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
}

impl RunConfig {
    /// Read a run config file. Relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut flat = FlatConfig::read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let file = |key: &str, flat: &mut FlatConfig| flat.take(key).map(|v| base.join(v));
        let mut cfg = Self {
            prices: file("prices", &mut flat),
            fundamentals: file("fundamentals", &mut flat),
            benchmarks: file("benchmarks", &mut flat),
            riskfree: file("riskfree", &mut flat),
            synth_config: file("synth_config", &mut flat),
            out: file("out", &mut flat),
            ..Self::default()
        };
        cfg.from = flat.take("from").map(|v| parse_date("from", &v)).transpose()?;
        cfg.to = flat.take("to").map(|v| parse_date("to", &v)).transpose()?;
        cfg.strategies = flat.take("strategies").map(|v| parse_strategies(&v)).transpose()?;
        cfg.fields = flat.take("fields").map(|v| parse_fields(&v)).transpose()?;
        cfg.seed = flat.take_parsed("seed")?;
        cfg.no_flip = flat.take_parsed("no_flip")?.unwrap_or(false);
        flat.finish()?;
        Ok(cfg)
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merge(self, over: RunConfig) -> Self {
        Self {
            prices: over.prices.or(self.prices),
            fundamentals: over.fundamentals.or(self.fundamentals),
            benchmarks: over.benchmarks.or(self.benchmarks),
            riskfree: over.riskfree.or(self.riskfree),
            synth_config: over.synth_config.or(self.synth_config),
            from: over.from.or(self.from),
            to: over.to.or(self.to),
            strategies: over.strategies.or(self.strategies),
            fields: over.fields.or(self.fields),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            no_flip: over.no_flip || self.no_flip,
        }
    }

    pub fn validate_range(&self) -> Result<()> {
        if let (Some(a), Some(b)) = (self.from, self.to) {
            if a > b {
                return Err(Error::Config(format!("from {a} is after to {b}")));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::config("--out is required"))
    }
}
