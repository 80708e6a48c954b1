//! Scenario files, presets and result output.

mod materials;
mod presets;
mod records;
mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use materials::{MaterialsSpec, Medium, Paint, Shape};
pub use presets::{presets, CavityStability, HeteroBlock, Preset, PresetRegistry, SrrArray, WaveguideReflection};
pub use records::{read_probe_csv, write_records, LineCsv, ProbeCsv};
pub use run::{build_system, run_scenario, BuiltScenario, RunOutput};

use crate::coupling::SatConfig;
use crate::error::{Error, Result};
use crate::solver::{ProbeSpec, SourceSpec, TimeConfig};
use crate::topology::{EmbeddedRegionSpec, GridSpec};

fn default_points() -> usize {
    200
}

/// Two-run reflection measurement on a line probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionSpec {
    pub port: String,
    pub f_min: f64,
    pub f_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<ReflectionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub time: TimeConfig,
    #[serde(default)]
    pub materials: MaterialsSpec,
    #[serde(default)]
    pub sat: SatConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub regions: Vec<EmbeddedRegionSpec>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
}

/// A parsed scenario and the keys that were filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: Scenario,
    pub defaults: Vec<String>,
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

pub fn parse_scenario_str(text: &str) -> Result<Parsed> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let msg = e.inner().message().to_string();
        if let Some(f) = missing_field(&msg) {
            path = if path == "." || path.is_empty() { f.to_string() } else { format!("{path}.{f}") };
        }
        Error::config(path, format!("{msg}; see `nonsplit preset` for a complete example"))
    })?;
    scenario.validate()?;
    let raw: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let full = toml::Table::try_from(&scenario).map_err(|e| Error::Parse(e.to_string()))?;
    let mut defaults = Vec::new();
    applied_defaults("", &raw, &full, &mut defaults);
    Ok(Parsed { scenario, defaults })
}

pub fn parse_scenario(path: &Path) -> Result<Parsed> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text)
}

fn applied_defaults(prefix: &str, raw: &toml::Table, full: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in full {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (raw.get(k), v) {
            (None, _) => out.push(format!("{path}={v}")),
            (Some(toml::Value::Table(r)), toml::Value::Table(f)) => applied_defaults(&path, r, f, out),
            (Some(toml::Value::Array(r)), toml::Value::Array(f)) => {
                for (i, (ri, fi)) in r.iter().zip(f).enumerate() {
                    if let (toml::Value::Table(rt), toml::Value::Table(ft)) = (ri, fi) {
                        applied_defaults(&format!("{path}[{i}]"), rt, ft, out);
                    }
                }
            }
            _ => {}
        }
    }
}

impl Scenario {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// Checks everything that does not need the assembled system.
    pub fn validate(&self) -> Result<()> {
        self.time.validate()?;
        self.sat.validate()?;
        self.materials.validate()?;
        for (k, s) in self.sources.iter().enumerate() {
            s.waveform().map_err(|e| match e {
                Error::Config { path, message } => Error::config(format!("sources[{k}].{path}"), message),
                other => other,
            })?;
        }
        if let Some(r) = &self.output.reflection {
            if !self.probes.iter().any(|p| p.name == r.port && p.line.is_some()) {
                return Err(Error::config(
                    "output.reflection.port",
                    format!("`{}` must name a line probe", r.port),
                ));
            }
            if !(r.f_max > r.f_min && r.f_min >= 0.0) || r.points < 2 {
                return Err(Error::config("output.reflection", "need 0 <= f_min < f_max and points >= 2"));
            }
        }
        Ok(())
    }

    /// The same scenario without embedded regions.
    pub fn reference(&self) -> Scenario {
        Scenario {
            regions: Vec::new(),
            output: OutputSpec::default(),
            ..self.clone()
        }
    }

    /// Lowest cutoff over all sources.
    pub fn source_cutoff(&self) -> Option<f64> {
        self.sources
            .iter()
            .filter_map(|s| s.waveform().ok())
            .map(|w| w.cutoff_hz())
            .reduce(f64::min)
    }
}
