//! Versioned JSON experiment configuration.
//!
//! Instance and realization may be given inline or as a path relative to
//! the configuration file. Without a file the bundled defaults are used: the
//! four-zone city with illustrative relocation costs and the printed
//! realization with `ybar = 750`.

use std::path::{Path, PathBuf};

use mibp::SolverConfig;
use rideshare_evsi::{CityInstance, Realization};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::InputError;

pub const CONFIG_VERSION: u32 = 1;

const BUNDLED_INSTANCE: &str = include_str!("../data/instance.json");
const BUNDLED_REALIZATION: &str = include_str!("../data/realization.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Makes results timing dependent; leave unset for reproducible runs.
    pub time_limit: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            rel_gap: d.rel_gap,
            node_limit: d.node_limit,
            time_limit: None,
        }
    }
}

impl SolverSection {
    pub fn to_solver(&self) -> SolverConfig {
        SolverConfig {
            rel_gap: self.rel_gap,
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            ..SolverConfig::default()
        }
    }
}

/// Driver belief: multipliers on an anchor demand. `solve` anchors on the
/// realized demand unless `anchor` is given; the sweep anchors on the
/// nominal demand of each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefSection {
    pub kappa: Vec<f64>,
    pub prob: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

impl Default for BeliefSection {
    fn default() -> Self {
        BeliefSection {
            kappa: vec![0.7, 1.0, 1.3],
            prob: vec![0.25, 0.5, 0.25],
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub seed: u64,
    /// Samples per nominal demand vector.
    pub samples: usize,
    /// Number of nominal demand vectors (and fleet placements).
    pub nominals: usize,
    pub demand_coefs: Vec<f64>,
    pub supply_coefs: Vec<f64>,
    pub spread_low: f64,
    pub spread_high: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            seed: 2021,
            samples: 10,
            nominals: 10,
            demand_coefs: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            supply_coefs: vec![0.25, 0.5, 0.75],
            spread_low: 0.7,
            spread_high: 1.3,
        }
    }
}

fn default_instance() -> Source<CityInstance> {
    Source::Inline(serde_json::from_str(BUNDLED_INSTANCE).expect("bundled instance parses"))
}

fn default_realization() -> Option<Source<Realization>> {
    Some(Source::Inline(
        serde_json::from_str(BUNDLED_REALIZATION).expect("bundled realization parses"),
    ))
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_instance")]
    pub instance: Source<CityInstance>,
    #[serde(default = "default_realization")]
    pub realization: Option<Source<Realization>>,
    #[serde(default = "default_true")]
    pub integer_flows: bool,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub belief: BeliefSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            version: CONFIG_VERSION,
            instance: default_instance(),
            realization: default_realization(),
            integer_flows: true,
            solver: SolverSection::default(),
            belief: BeliefSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn resolve<T: serde::de::DeserializeOwned>(src: Source<T>, base: &Path) -> Result<T, InputError> {
    match src {
        Source::Inline(v) => Ok(v),
        Source::Path(p) => read_json(&base.join(p)),
    }
}

impl Config {
    /// Reads a configuration, or the bundled default when `path` is `None`,
    /// and inlines every referenced file.
    pub fn load(path: Option<&Path>) -> Result<Config, InputError> {
        let (cfg, base): (Config, PathBuf) = match path {
            None => (Config::default(), PathBuf::from(".")),
            Some(p) => (read_json(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        };
        if cfg.version != CONFIG_VERSION {
            return Err(InputError(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        cfg.inline(&base)
    }

    fn inline(self, base: &Path) -> Result<Config, InputError> {
        let instance = resolve(self.instance, base)?;
        let realization = match self.realization {
            Some(r) => Some(Source::Inline(resolve(r, base)?)),
            None => None,
        };
        Ok(Config {
            instance: Source::Inline(instance),
            realization,
            ..self
        })
    }

    /// Replaces the instance or realization by the given files.
    pub fn override_inputs(&mut self, instance: Option<&Path>, realization: Option<&Path>) -> Result<(), InputError> {
        if let Some(p) = instance {
            self.instance = Source::Inline(read_json(p)?);
        }
        if let Some(p) = realization {
            self.realization = Some(Source::Inline(read_json(p)?));
        }
        Ok(())
    }

    pub fn instance(&self) -> &CityInstance {
        match &self.instance {
            Source::Inline(i) => i,
            Source::Path(_) => panic!("config not inlined"),
        }
    }

    pub fn realization(&self) -> Option<&Realization> {
        match &self.realization {
            Some(Source::Inline(r)) => Some(r),
            Some(Source::Path(_)) => panic!("config not inlined"),
            None => None,
        }
    }

    /// Pretty JSON of the inlined configuration, the form written next to
    /// results and hashed.
    pub fn canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
