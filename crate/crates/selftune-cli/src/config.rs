//! Experiment configuration and manifest formats. A manifest embeds the
//! fully resolved configuration, so pointing `--config` at a previous
//! run's manifest reproduces its artifacts.

use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use selftune::config::ScenarioConfig;
use selftune::dp::{backward_pieces, DpOptions};
use selftune::linalg::DareOptions;
use selftune::model::{ActuatorSubset, Scenario};
use selftune::sim::PolicyKind;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_period() -> usize {
    1
}
fn default_window() -> usize {
    5
}
fn default_ridge() -> f64 {
    1e-8
}

/// Policy description as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PolicyConfig {
    Fixed {
        /// 1-based actuator indices.
        subset: Vec<usize>,
        #[serde(default)]
        dare: DareOptions,
    },
    GreedyKnownModel {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default)]
        dare: DareOptions,
    },
    GreedySelfTuning {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default)]
        dare: DareOptions,
    },
    ModeAwareGreedy {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default)]
        dare: DareOptions,
    },
    ExactDp {},
}

impl PolicyConfig {
    /// Instantiates the policy against a scenario (exact-DP builds its
    /// value tables here).
    pub fn instantiate(&self, scenario: &Scenario) -> anyhow::Result<PolicyKind> {
        Ok(match self {
            PolicyConfig::Fixed { subset, dare } => PolicyKind::FixedArchitectureLqr {
                subset: ActuatorSubset::new(subset.clone())?,
                dare: dare.clone(),
            },
            PolicyConfig::GreedyKnownModel { period, dare } => PolicyKind::GreedyKnownModel {
                period: *period,
                dare: dare.clone(),
            },
            PolicyConfig::GreedySelfTuning {
                period,
                ridge,
                dare,
            } => PolicyKind::GreedySelfTuning {
                period: *period,
                ridge: *ridge,
                dare: dare.clone(),
            },
            PolicyConfig::ModeAwareGreedy {
                period,
                window,
                dare,
            } => PolicyKind::ModeAwareGreedy {
                period: *period,
                window: *window,
                dare: dare.clone(),
            },
            PolicyConfig::ExactDp {} => {
                let tables = backward_pieces(scenario, &DpOptions::default())
                    .context("building exact-DP value tables for the scenario")?;
                PolicyKind::ExactDp {
                    tables: Arc::new(tables),
                }
            }
        })
    }
}

/// Resolved experiment description; also what the manifest embeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_config_version")]
    pub version: u32,
    /// One of `partition`, `simple-example`, `lqr50`, `custom`.
    pub preset: String,
    /// Base seed (first instance / rollout / sampling seed).
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of seeds/instances (presets supply their own defaults).
    #[serde(default)]
    pub seeds: Option<usize>,
    /// Partition sample count.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Dwell length of the switching example.
    #[serde(default)]
    pub dwell: Option<usize>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Required for `custom`; optional override for `partition`.
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    /// Required for `custom`.
    #[serde(default)]
    pub policies: Option<Vec<PolicyConfig>>,
}

fn default_config_version() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn for_preset(preset: &str) -> Self {
        Self {
            version: 1,
            preset: preset.to_string(),
            seed: None,
            seeds: None,
            samples: None,
            dwell: None,
            out: None,
            threads: None,
            scenario: None,
            policies: None,
        }
    }

    /// Fills in the preset's stock parameters so that the manifest records
    /// a fully explicit configuration.
    pub fn apply_preset_defaults(&mut self) {
        match self.preset.as_str() {
            "partition" => {
                self.seed.get_or_insert(1);
                self.samples.get_or_insert(10_000);
            }
            "simple-example" => {
                self.seed.get_or_insert(0);
                self.seeds.get_or_insert(20);
                self.dwell.get_or_insert(25);
            }
            "lqr50" => {
                self.seed.get_or_insert(0);
                self.seeds.get_or_insert(10);
            }
            _ => {
                self.seed.get_or_insert(0);
                self.seeds.get_or_insert(1);
            }
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match self.preset.as_str() {
            "partition" | "simple-example" | "lqr50" => {}
            "custom" => {
                if self.scenario.is_none() {
                    bail!("preset 'custom' requires a 'scenario' section in the config file");
                }
                if self.policies.as_ref().is_none_or(|p| p.is_empty()) {
                    bail!("preset 'custom' requires a nonempty 'policies' list");
                }
            }
            other => bail!(
                "unknown preset '{other}' (expected partition, simple-example, lqr50, or custom)"
            ),
        }
        if self.seeds == Some(0) {
            bail!("'seeds' must be at least 1");
        }
        if self.samples == Some(0) {
            bail!("'samples' must be at least 1");
        }
        Ok(())
    }
}

/// Run record written next to the artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
}

/// Accepts either a bare [`ExperimentConfig`] or a [`Manifest`] (whose
/// embedded config is extracted), so manifests round-trip as configs.
pub fn load_config(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing JSON in {}", path.display()))?;
    if value.get("config").is_some() {
        let manifest: Manifest = serde_json::from_value(value)
            .with_context(|| format!("parsing manifest in {}", path.display()))?;
        Ok(manifest.config)
    } else {
        let config: ExperimentConfig = serde_json::from_value(value)
            .with_context(|| format!("parsing experiment config in {}", path.display()))?;
        Ok(config)
    }
}
