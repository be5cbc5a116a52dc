use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ingest::{PlayerIdentity, SchemaConfig};
use crate::montecarlo::{Engine, DEFAULT_TICKET_CAP};
use crate::prizes::ModelConstants;
use crate::synth::PopulationSpec;

pub const DEFAULT_SEED: u64 = 20200131;

/// Outlier rectangle settings. When either threshold is missing, both are
/// calibrated so that `calibrate_top_k` players fall inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlagConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_threshold: Option<f64>,
    pub calibrate_top_k: usize,
}

impl Default for FlagConfig {
    fn default() -> Self {
        Self { entropy_threshold: None, loss_threshold: None, calibrate_top_k: 9 }
    }
}

/// Which players the simulate stage covers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerSelection {
    Flagged,
    Expansion,
    #[default]
    FlaggedAndExpansion,
    List(Vec<String>),
}

impl std::str::FromStr for PlayerSelection {
    type Err = String;

    /// `flagged`, `expansion`, `flagged-and-expansion`, or a comma-separated
    /// list of player ids.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "flagged" => Ok(Self::Flagged),
            "expansion" => Ok(Self::Expansion),
            "flagged-and-expansion" | "flagged+expansion" => Ok(Self::FlaggedAndExpansion),
            "" => Err("empty player selection".into()),
            list => Ok(Self::List(list.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub players: PlayerSelection,
    pub engine: Engine,
    pub ticket_cap: u64,
    /// Also write every replicate total.
    pub dump_totals: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            players: PlayerSelection::default(),
            engine: Engine::Fast,
            ticket_cap: DEFAULT_TICKET_CAP,
            dump_totals: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub restarts: usize,
    pub min_wins: usize,
    pub sweep_k: Vec<usize>,
    /// Flagged players left out of the co-clustering check in the sweep.
    pub sweep_exceptions: Vec<String>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            min_wins: crate::cluster::DEFAULT_MIN_WINS,
            sweep_k: vec![10, 15, 20, 25, 30],
            sweep_exceptions: Vec::new(),
        }
    }
}

/// Everything a run depends on.
///
/// The output directory and thread count are not part of the serialized
/// configuration: neither may change any result, and leaving them out keeps
/// `run_config.toml` identical between runs that differ only in them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claims: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prizes: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    pub master_seed: u64,
    pub identity: PlayerIdentity,
    pub schema: SchemaConfig,
    pub constants: ModelConstants,
    pub flag: FlagConfig,
    pub simulate: SimulateConfig,
    pub cluster: ClusterConfig,
    pub synth: PopulationSpec,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            claims: None,
            prizes: None,
            mapping: None,
            master_seed: DEFAULT_SEED,
            identity: PlayerIdentity::default(),
            schema: SchemaConfig::default(),
            constants: ModelConstants::default(),
            flag: FlagConfig::default(),
            simulate: SimulateConfig::default(),
            cluster: ClusterConfig::default(),
            synth: PopulationSpec::default(),
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Applies a TOML document on top of this configuration. Tables merge
    /// key by key; any other value in the overlay replaces the current one.
    pub fn with_overlay(&self, overlay: &str) -> Result<RunConfig, PipelineError> {
        let overlay: toml::Table =
            overlay.parse().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        merge_tables(&mut base, overlay);
        let mut merged: RunConfig =
            toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        merged.out = self.out.clone();
        merged.threads = self.threads;
        Ok(merged)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.constants.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.cluster.restarts == 0 {
            return Err(PipelineError::Config("cluster.restarts must be at least 1".into()));
        }
        if self.cluster.sweep_k.contains(&0) {
            return Err(PipelineError::Config("cluster.sweep_k values must be at least 1".into()));
        }
        if self.flag.calibrate_top_k == 0
            && (self.flag.entropy_threshold.is_none() || self.flag.loss_threshold.is_none())
        {
            return Err(PipelineError::Config(
                "flag.calibrate_top_k must be at least 1 when thresholds are not given".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(PipelineError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
