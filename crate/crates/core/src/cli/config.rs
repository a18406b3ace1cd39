//! Scenario files.
//!
//! A scenario file is TOML with two optional tables. Every key is optional and
//! overrides the built-in scenario named by `scenario.base` (default
//! `moderate`):
//!
//! ```toml
//! [scenario]
//! base = "extreme"
//! name = "extreme-diag"
//! carrier_hz = 4e9
//! bandwidth_hz = 15e6
//! tau_max_s = 700e-9
//! nu_max_hz = 9260.0
//! paths = 30
//! n_t = 13
//!
//! [run]
//! snr_db = [15, 20, 25, 30]
//! trials = 100
//! schemes = ["ostf", "otfs", "ofdm", "eig"]
//! csi = "diag"
//! seed = 1
//! threads = 4
//! ```
//!
//! The `version`, `seeds` and `notes` entries written to run metadata are
//! accepted and ignored, so a metadata file can be passed back as a config.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::{Table, Value};

use crate::montecarlo::{ScenarioConfig, System};
use crate::receiver::CsiMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario `{0}` (available: moderate, extreme)")]
    UnknownScenario(String),
    #[error("unknown scheme `{0}` (available: eig, ofdm, ostf, ostf-u, otfs)")]
    UnknownScheme(String),
    #[error("cannot read config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// A scenario plus run options that are not part of the simulation itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: ScenarioConfig,
    pub threads: Option<usize>,
}

pub fn builtin(name: &str) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::builtin(name).ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))
}

pub fn parse_schemes(list: &str) -> Result<BTreeSet<System>, ConfigError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<System>().map_err(|_| ConfigError::UnknownScheme(s.trim().to_string())))
        .collect()
}

/// Reads `path` and merges it over a built-in scenario. `base` wins over the
/// file's `scenario.base` key.
pub fn load_config(path: &Path, base: Option<&str>) -> Result<ResolvedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, base)
}

pub fn parse_config(text: &str, base: Option<&str>) -> Result<ResolvedConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(vec![e.to_string()]))?;
    let mut errs = Vec::new();
    let mut unknown_names = None;

    let scenario_t = section(&table, "scenario", &mut errs);
    let run_t = section(&table, "run", &mut errs);
    for key in table.keys() {
        if !["scenario", "run", "version", "seeds", "notes"].contains(&key.as_str()) {
            errs.push(format!("unknown section `{key}`"));
        }
    }

    let file_base = scenario_t.and_then(|t| string(t, "scenario.base", &mut errs));
    let base_name = base.map(str::to_string).or(file_base).unwrap_or_else(|| "moderate".into());
    let mut cfg = match ScenarioConfig::builtin(&base_name) {
        Some(c) => c,
        None => {
            unknown_names = Some(ConfigError::UnknownScenario(base_name.clone()));
            ScenarioConfig::moderate()
        }
    };
    let mut threads = None;

    if let Some(t) = scenario_t {
        check_keys(
            t,
            "scenario",
            &["base", "name", "carrier_hz", "bandwidth_hz", "tau_max_s", "nu_max_hz", "paths", "n_t"],
            &mut errs,
        );
        if let Some(v) = string(t, "scenario.name", &mut errs) {
            cfg.name = v;
        }
        if let Some(v) = float(t, "scenario.carrier_hz", &mut errs) {
            cfg.carrier_hz = v;
        }
        if let Some(v) = float(t, "scenario.bandwidth_hz", &mut errs) {
            cfg.bandwidth_hz = v;
        }
        if let Some(v) = float(t, "scenario.tau_max_s", &mut errs) {
            cfg.tau_max = v;
        }
        if let Some(v) = float(t, "scenario.nu_max_hz", &mut errs) {
            cfg.nu_max = v;
        }
        if let Some(v) = count(t, "scenario.paths", &mut errs) {
            cfg.paths = v;
        }
        if let Some(v) = count(t, "scenario.n_t", &mut errs) {
            cfg.n_t_hint = v;
        }
    }
    if let Some(t) = run_t {
        check_keys(t, "run", &["snr_db", "trials", "schemes", "csi", "seed", "threads"], &mut errs);
        if let Some(v) = t.get("snr_db") {
            match v.as_array() {
                Some(items) => {
                    let mut snrs = Vec::new();
                    for (i, item) in items.iter().enumerate() {
                        match as_float(item) {
                            Some(x) => snrs.push(x),
                            None => errs.push(format!("run.snr_db[{i}] must be a number")),
                        }
                    }
                    cfg.snr_points_db = snrs;
                }
                None => errs.push("run.snr_db must be an array of numbers".into()),
            }
        }
        if let Some(v) = count(t, "run.trials", &mut errs) {
            cfg.trials = v;
        }
        if let Some(v) = t.get("schemes") {
            match v.as_array() {
                Some(items) => {
                    let mut set = BTreeSet::new();
                    for (i, item) in items.iter().enumerate() {
                        match item.as_str() {
                            Some(s) => match s.parse::<System>() {
                                Ok(sys) => {
                                    set.insert(sys);
                                }
                                Err(_) => {
                                    unknown_names.get_or_insert(ConfigError::UnknownScheme(s.to_string()));
                                }
                            },
                            None => errs.push(format!("run.schemes[{i}] must be a string")),
                        }
                    }
                    cfg.systems = set;
                }
                None => errs.push("run.schemes must be an array of strings".into()),
            }
        }
        if let Some(s) = string(t, "run.csi", &mut errs) {
            match s.parse::<CsiMode>() {
                Ok(m) => cfg.csi_mode = m,
                Err(e) => errs.push(format!("run.csi: {e}")),
            }
        }
        if let Some(v) = t.get("seed") {
            match v.as_integer() {
                // negative values carry the upper half of the u64 range
                Some(i) => cfg.base_seed = i as u64,
                None => errs.push("run.seed must be an integer".into()),
            }
        }
        threads = count(t, "run.threads", &mut errs);
        if threads == Some(0) {
            errs.push("run.threads must be at least 1".into());
        }
    }

    if let Err(mut v) = cfg.validate() {
        errs.append(&mut v);
    }
    if let Some(e) = unknown_names {
        if errs.is_empty() {
            return Err(e);
        }
        errs.push(e.to_string());
    }
    if errs.is_empty() {
        Ok(ResolvedConfig { scenario: cfg, threads })
    } else {
        Err(ConfigError::Invalid(errs))
    }
}

fn section<'a>(table: &'a Table, key: &str, errs: &mut Vec<String>) -> Option<&'a Table> {
    match table.get(key) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errs.push(format!("`{key}` must be a table"));
            None
        }
    }
}

fn check_keys(t: &Table, section: &str, allowed: &[&str], errs: &mut Vec<String>) {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(format!("unknown key `{section}.{key}`"));
        }
    }
}

fn leaf<'a>(t: &'a Table, dotted: &str) -> Option<&'a Value> {
    t.get(dotted.rsplit('.').next().unwrap_or(dotted))
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn float(t: &Table, key: &str, errs: &mut Vec<String>) -> Option<f64> {
    let v = leaf(t, key)?;
    let f = as_float(v);
    if f.is_none() {
        errs.push(format!("{key} must be a number"));
    }
    f
}

fn count(t: &Table, key: &str, errs: &mut Vec<String>) -> Option<usize> {
    let v = leaf(t, key)?;
    match v.as_integer() {
        Some(i) if i >= 0 => Some(i as usize),
        _ => {
            errs.push(format!("{key} must be a non-negative integer"));
            None
        }
    }
}

fn string(t: &Table, key: &str, errs: &mut Vec<String>) -> Option<String> {
    let v = leaf(t, key)?;
    match v.as_str() {
        Some(s) => Some(s.to_string()),
        None => {
            errs.push(format!("{key} must be a string"));
            None
        }
    }
}

/// Serializes the resolved configuration as TOML in the file schema above.
pub fn to_table(cfg: &ScenarioConfig, threads: Option<usize>) -> Table {
    let mut scenario = Table::new();
    scenario.insert("name".into(), cfg.name.clone().into());
    scenario.insert("carrier_hz".into(), cfg.carrier_hz.into());
    scenario.insert("bandwidth_hz".into(), cfg.bandwidth_hz.into());
    scenario.insert("tau_max_s".into(), cfg.tau_max.into());
    scenario.insert("nu_max_hz".into(), cfg.nu_max.into());
    scenario.insert("paths".into(), (cfg.paths as i64).into());
    scenario.insert("n_t".into(), (cfg.n_t_hint as i64).into());

    let mut run = Table::new();
    run.insert(
        "snr_db".into(),
        Value::Array(cfg.snr_points_db.iter().map(|&v| v.into()).collect()),
    );
    run.insert("trials".into(), (cfg.trials as i64).into());
    run.insert(
        "schemes".into(),
        Value::Array(cfg.systems.iter().map(|s| s.as_str().into()).collect()),
    );
    run.insert("csi".into(), cfg.csi_mode.as_str().into());
    // TOML integers are signed; the seed round-trips through its bit pattern
    run.insert("seed".into(), (cfg.base_seed as i64).into());
    if let Some(k) = threads {
        run.insert("threads".into(), (k as i64).into());
    }

    let mut t = Table::new();
    t.insert("scenario".into(), Value::Table(scenario));
    t.insert("run".into(), Value::Table(run));
    t
}
