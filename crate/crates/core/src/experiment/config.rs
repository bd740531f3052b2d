//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys pick the scenario, method,
//! seeds and output directory; the `[world]`, `[ppo]`, `[train]` and `[icr]`
//! tables override individual fields. `include = ["base.toml", ...]` pulls in
//! other files first (paths relative to the including file); later files and
//! the including file itself win, table by table and key by key.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{Scenario, WorldConfig};
use crate::error::{Error, Result};
use crate::icr::IcrConfig;
use crate::policy::{Arch, PpoConfig, TrainConfig};

/// Motion noise standard deviation used when `motion_noise = true`.
pub const DEFAULT_MOTION_NOISE: f64 = 0.1;
pub const PAPER_SCALE_STEPS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ppo-att")]
    PpoAtt,
    #[serde(rename = "ppo-mlp")]
    PpoMlp,
    #[serde(rename = "icr")]
    Icr,
    #[serde(rename = "random")]
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::PpoAtt, Method::PpoMlp, Method::Icr, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::PpoAtt => "ppo-att",
            Method::PpoMlp => "ppo-mlp",
            Method::Icr => "icr",
            Method::Random => "random",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::PpoAtt | Method::PpoMlp)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub method: Method,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub motion_noise: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Evaluation maps per model; map `m` is the episode with seed `eval_seed_base + m`.
    #[serde(default = "default_eval_maps")]
    pub eval_maps: usize,
    #[serde(default = "default_eval_seed_base")]
    pub eval_seed_base: u64,
    /// Field overrides on top of the scenario preset.
    #[serde(default)]
    pub world: toml::Table,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub icr: IcrConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_maps() -> usize {
    10
}

fn default_eval_seed_base() -> u64 {
    1_000_000
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, method: Method) -> Self {
        Self {
            scenario,
            method,
            seeds: default_seeds(),
            motion_noise: false,
            output_dir: default_output_dir(),
            eval_maps: default_eval_maps(),
            eval_seed_base: default_eval_seed_base(),
            world: toml::Table::new(),
            ppo: PpoConfig::default(),
            train: TrainConfig::default(),
            icr: IcrConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        if table.remove("include").is_some() {
            return Err(Error::Config(
                "include is only resolved when loading from a file".into(),
            ));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, resolving includes.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_table(load_table(path, &mut BTreeSet::new())?)
    }

    /// Reads `path` and applies `key.path=value` overrides before parsing.
    pub fn load_with_overrides(path: Option<&Path>, base: toml::Table, sets: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => load_table(p, &mut BTreeSet::new())?,
            None => toml::Table::new(),
        };
        merge(&mut table, base);
        for s in sets {
            let (key, value) = parse_set(s)?;
            set_path(&mut table, &key, value)?;
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.eval_maps == 0 {
            return Err(Error::Config("eval_maps must be >= 1".into()));
        }
        self.ppo.validate()?;
        self.icr.validate()?;
        self.world_config()?;
        self.arch()?;
        Ok(())
    }

    /// Scenario preset with the `[world]` overrides and the noise flag applied.
    pub fn world_config(&self) -> Result<WorldConfig> {
        let preset = WorldConfig::scenario(self.scenario);
        let mut table = toml::Table::try_from(&preset).map_err(|e| Error::Config(e.to_string()))?;
        if self.motion_noise {
            table.insert("motion_noise_std".into(), toml::Value::Float(DEFAULT_MOTION_NOISE));
        }
        merge(&mut table, self.world.clone());
        let world: WorldConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[world]: {e}")))?;
        world.validate()?;
        Ok(world)
    }

    /// Network architecture for learned methods; `None` for baselines.
    pub fn arch(&self) -> Result<Option<Arch>> {
        match (self.method, self.scenario) {
            (Method::PpoAtt, Scenario::Joint) => Ok(Some(Arch::Joint)),
            (Method::PpoAtt, _) => Ok(Some(Arch::Attention)),
            (Method::PpoMlp, Scenario::Joint) => Err(Error::Config(
                "ppo-mlp has no map branch; the joint scenario needs ppo-att".into(),
            )),
            (Method::PpoMlp, _) => Ok(Some(Arch::Mlp)),
            _ => Ok(None),
        }
    }

    /// `<scenario>_<method>_<seed>`
    pub fn artifact_stem(&self, seed: u64) -> String {
        format!("{}_{}_{}", self.scenario.name(), self.method.name(), seed)
    }

    /// `<scenario>_<method>` for files that cover every seed.
    pub fn group_stem(&self) -> String {
        let noise = if self.motion_noise { "_noise" } else { "" };
        format!("{}_{}{}", self.scenario.name(), self.method.name(), noise)
    }

    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.eval_maps as u64).map(|m| self.eval_seed_base + m).collect()
    }
}

fn load_table(path: &Path, stack: &mut BTreeSet<PathBuf>) -> Result<toml::Table> {
    let canon = path
        .canonicalize()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !stack.insert(canon.clone()) {
        return Err(Error::Config(format!("include cycle through {}", path.display())));
    }
    let text = std::fs::read_to_string(&canon)?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(toml::Value::String(s)) => vec![s],
        Some(toml::Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                toml::Value::String(s) => Ok(s),
                other => Err(Error::Config(format!("include entries must be strings, got {other}"))),
            })
            .collect::<Result<_>>()?,
        Some(other) => return Err(Error::Config(format!("include must be a string or list, got {other}"))),
    };
    let dir = canon.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut merged = toml::Table::new();
    for inc in includes {
        merge(&mut merged, load_table(&dir.join(inc), stack)?);
    }
    merge(&mut merged, table);
    stack.remove(&canon);
    Ok(merged)
}

/// Deep merge: tables merge key by key, everything else is replaced.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `a.b.c=value`; the value is read as TOML, falling back to a bare string.
pub fn parse_set(s: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    let key: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if key.iter().any(String::is_empty) {
        return Err(Error::Config(format!("override '{s}' has an empty key segment")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn set_path(table: &mut toml::Table, key: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = key.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{}' crosses a non-table", key.join("."))))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}
