//! Experiment configuration: one TOML file fully specifies a run. Unknown
//! fields are rejected; two runs from identical configs and seeds produce
//! identical outputs.

use crate::encoders::PolicyArch;
use crate::env::RewardConfig;
use crate::oracle::OracleConfig;
use crate::profiles::SyntheticConfig;
use crate::td3::Td3Config;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config field {field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub profiles: ProfilesSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub td3: Td3Config,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub suite: SuiteSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub out_dir: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub file: String,
    #[serde(default)]
    pub reconfig_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilesSection {
    pub source: ProfileSource,
    pub synthetic: SyntheticConfig,
    pub csv_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub variant: String,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            variant: "gcn".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 3 }
    }
}

/// Checkpoints consumed by the `suite` command, keyed by variant name.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    pub checkpoints: std::collections::BTreeMap<String, String>,
    /// Counterpart system for cross-network transfer.
    pub transfer_network: Option<String>,
    pub transfer_reconfig: Option<String>,
    pub transfer_checkpoints: std::collections::BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        PolicyArch::parse(&self.policy.variant).map_err(|e| ConfigError::Invalid {
            field: "policy.variant".into(),
            message: e.to_string(),
        })?;
        self.td3.validate().map_err(|message| ConfigError::Invalid {
            field: "td3".into(),
            message,
        })?;
        if self.experiment.seeds.is_empty() {
            return Err(ConfigError::Invalid {
                field: "experiment.seeds".into(),
                message: "need at least one seed".into(),
            });
        }
        if self.profiles.source == ProfileSource::Csv && self.profiles.csv_path.is_none() {
            return Err(ConfigError::Invalid {
                field: "profiles.csv_path".into(),
                message: "required when profiles.source = \"csv\"".into(),
            });
        }
        if self.reward.phi0 <= 0.0 || self.reward.phi1 < 0.0 {
            return Err(ConfigError::Invalid {
                field: "reward".into(),
                message: format!(
                    "need phi0 > 0 and phi1 >= 0, got {} and {}",
                    self.reward.phi0, self.reward.phi1
                ),
            });
        }
        if self.eval.episodes == 0 {
            return Err(ConfigError::Invalid {
                field: "eval.episodes".into(),
                message: "need at least one evaluation episode".into(),
            });
        }
        Ok(())
    }

    pub fn arch(&self) -> PolicyArch {
        PolicyArch::parse(&self.policy.variant).expect("validated")
    }

    /// Resolve a data-relative path against the environment override
    /// `ESSDISPATCH_DATA` when set.
    pub fn resolve_data_path(path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        if p.is_absolute() || p.exists() {
            return p;
        }
        if let Ok(root) = std::env::var("ESSDISPATCH_DATA") {
            let candidate = PathBuf::from(root).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
        p
    }

    /// Stable hash of the full configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [experiment]
        name = "smoke"
        out_dir = "runs/smoke"

        [network]
        file = "data/feeder34.toml"
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.td3.batch, 512);
        assert_eq!(cfg.td3.gamma, 0.995);
        assert_eq!(cfg.td3.lr, 6e-5);
        assert_eq!(cfg.reward.phi0, 1.0);
        assert_eq!(cfg.reward.phi1, 200.0);
        assert_eq!(cfg.policy.variant, "gcn");
    }

    #[test]
    fn unknown_fields_rejected_with_path() {
        let text = format!("{MINIMAL}\n[td3]\nlearning_rate = 0.1\n");
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn bad_variant_lists_options() {
        let text = format!("{MINIMAL}\n[policy]\nvariant = \"transformer\"\n");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("nn, gcn, tagconv, gatv2"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        let b: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c: ExperimentConfig =
            toml::from_str(&format!("{MINIMAL}\n[td3]\nbatch = 64\n")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
