//! Run configuration.
//!
//! A single TOML file; every field has a default and command-line flags override
//! the file. The resolved configuration is echoed next to each run's outputs and can
//! be fed back in with `--config` to replay the run exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    dedup_by_url, load_dataset, parse_dataset, FeatureError, FixtureWhois, LabeledUrl, NoopWhois, WhoisClient,
};
use crate::ledger::LedgerParams;
use crate::model::TrainConfig;
use crate::sim::{ActorSpec, SimConfig, Strategy};
use crate::{BUNDLED_DATASET, BUNDLED_WHOIS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("dataset {path} does not exist")]
    MissingDataset { path: String },
    #[error("whois fixture {path} does not exist")]
    MissingWhois { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub base_fraction: f64,
    pub good_fraction: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            base_fraction: 0.2,
            good_fraction: 0.55,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `None` selects the bundled synthetic dataset.
    pub dataset_path: Option<PathBuf>,
    /// `None` selects the bundled fixture for the bundled dataset and a zero-days client otherwise.
    pub whois_fixture_path: Option<PathBuf>,
    /// Age reported for domains missing from the fixture.
    pub whois_default_days: u32,
    pub seed: u64,
    pub rounds: usize,
    pub out_dir: PathBuf,
    pub curve_sizes: Vec<usize>,
    pub partition: PartitionConfig,
    pub ledger: LedgerParams,
    pub train: TrainConfig,
    pub actors: Vec<ActorSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            whois_fixture_path: None,
            whois_default_days: 0,
            seed: 42,
            rounds: 50,
            out_dir: PathBuf::from("out"),
            curve_sizes: (1..=100).map(|i| i * 10).collect(),
            partition: PartitionConfig::default(),
            ledger: LedgerParams::default(),
            train: TrainConfig::default(),
            actors: default_actors(),
        }
    }
}

/// Two honest contributors and one label flipper.
pub fn default_actors() -> Vec<ActorSpec> {
    vec![
        ActorSpec::new("bad-1", Strategy::Bad, 1_000, 100, 10),
        ActorSpec::new("good-1", Strategy::Good, 1_000, 100, 10),
        ActorSpec::new("good-2", Strategy::Good, 1_000, 100, 10),
    ]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(path) = &self.dataset_path {
            if !path.exists() {
                return Err(ConfigError::MissingDataset {
                    path: path.display().to_string(),
                });
            }
        }
        if let Some(path) = &self.whois_fixture_path {
            if !path.exists() {
                return Err(ConfigError::MissingWhois {
                    path: path.display().to_string(),
                });
            }
        }
        if self.rounds == 0 {
            return Err(ConfigError::Invalid("rounds must be at least 1".into()));
        }
        let PartitionConfig {
            base_fraction: b,
            good_fraction: g,
        } = self.partition;
        if !(b > 0.0 && b < 1.0 && (0.0..1.0).contains(&g) && b + g < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "partition fractions base={b} good={g} must satisfy 0 < base, 0 <= good, base + good < 1"
            )));
        }
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for actor in &self.actors {
            actor.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            rounds: self.rounds,
            ledger: self.ledger,
            train: self.train,
            seed: self.seed,
        }
    }

    /// Rows of the configured dataset with repeated urls dropped.
    pub fn load_rows(&self) -> Result<(Vec<LabeledUrl>, usize), FeatureError> {
        let mut rows = match &self.dataset_path {
            Some(path) => load_dataset(path)?,
            None => parse_dataset(BUNDLED_DATASET)?,
        };
        let dropped = dedup_by_url(&mut rows);
        Ok((rows, dropped))
    }

    pub fn whois(&self) -> Result<Arc<dyn WhoisClient>, FeatureError> {
        Ok(match (&self.whois_fixture_path, &self.dataset_path) {
            (Some(path), _) => Arc::new(FixtureWhois::load(path, self.whois_default_days)?),
            (None, None) => Arc::new(FixtureWhois::parse(BUNDLED_WHOIS, self.whois_default_days)?),
            (None, Some(_)) if self.whois_default_days == 0 => Arc::new(NoopWhois),
            (None, Some(_)) => Arc::new(FixtureWhois::new(self.whois_default_days)),
        })
    }
}
