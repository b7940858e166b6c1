//! Versioned JSON run configuration and the metadata sidecar written next
//! to tag files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{ExperimentConfig, RunMetadata};
use crate::sweeps::{SweepPlan, SweepSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Top-level configuration consumed by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub verbosity: u8,
}

impl RunConfig {
    pub fn new(experiment: ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            sweep: None,
            output: None,
            format: OutputFormat::Csv,
            verbosity: 0,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.experiment.validate()?;
        if let Some(spec) = self.sweep_spec() {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.clone().map(|plan| SweepSpec {
            base: self.experiment.clone(),
            plan,
        })
    }
}

/// JSON written next to a tag stream: run provenance plus the full config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub metadata: RunMetadata,
    pub config: RunConfig,
}

impl Sidecar {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s)?;
        sc.config.validate()?;
        Ok(sc)
    }
}

/// Sidecar path for a tag file: `<file>.meta.json`.
pub fn sidecar_path(tags: &Path) -> PathBuf {
    let mut name = tags.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}
