//! TOML configuration for the CLI: dataset generation and pipeline options.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::AssignMethod;
use crate::correlate::CorrelationConfig;
use crate::error::{Error, Result};
use crate::metrics::experiment::SelectionSettings;
use crate::pipeline::PipelineOptions;
use crate::switchid::ForestConfig;
use crate::synth::{MissingMode, NetworkTemplate, ProfileConfig, SwitchSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSection {
    pub noise_sd: f64,
    pub missing_fraction: f64,
    pub missing_mode: MissingMode,
}

impl Default for CorruptionSection {
    fn default() -> Self {
        Self { noise_sd: 0.0, missing_fraction: 0.0, missing_mode: MissingMode::RandomPoints }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub k: usize,
    pub method: AssignMethod,
    pub train_fraction: f64,
    pub sm_cap: Option<usize>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { k: 1, method: AssignMethod::Mfp, train_fraction: 0.75, sm_cap: None }
    }
}

/// One config file feeds both `generate` and `pipeline`; each command reads
/// the sections it needs and ignores the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub seed: u64,
    pub network: Option<NetworkTemplate>,
    pub profiles: Option<ProfileConfig>,
    pub switch: Option<SwitchSpec>,
    pub corruption: Option<CorruptionSection>,
    pub selection: Option<SelectionSettings>,
    pub correlation: Option<CorrelationConfig>,
    pub forest: Option<ForestConfig>,
    pub pipeline: Option<PipelineSection>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ConfigFile = toml::from_str(&text)?;
        Ok(cfg)
    }

    pub fn require_network(&self) -> Result<&NetworkTemplate> {
        self.network
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing the [network] section".into()))
    }

    /// Pipeline options assembled from the optional sections over defaults.
    pub fn pipeline_options(&self) -> PipelineOptions {
        let mut opts = PipelineOptions { seed: self.seed, ..PipelineOptions::default() };
        if let Some(sel) = &self.selection {
            opts.time_filter = sel.time_filter;
            opts.t1 = sel.t1;
            opts.t2 = sel.t2;
            opts.keep_inside = sel.keep_inside;
        }
        if let Some(corr) = &self.correlation {
            opts.correlation = *corr;
        }
        if let Some(forest) = &self.forest {
            opts.forest = forest.clone();
        }
        if let Some(p) = &self.pipeline {
            opts.k = p.k;
            opts.method = p.method;
            opts.train_fraction = p.train_fraction;
            opts.sm_cap = p.sm_cap;
        }
        opts
    }
}
