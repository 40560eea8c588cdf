//! Staked crowdsourcing for web-spam detection.
//!
//! Contributors stake currency and submit labeled URLs. An oracle retrains a spam
//! classifier on the production data plus the submission and weighs the submission
//! by the relative accuracy change on a fixed base set, penalizing repeats. The
//! ledger then pays `stake + weight * stake` or keeps the stake.
//!
//! * [`features`]: URL parsing, feature extraction, whois lookups, dataset I/O
//! * [`model`]: logistic-regression classifier and accuracy curves
//! * [`oracle`]: submission weighting and submission history
//! * [`ledger`]: stakes, settlement, slashing, fees, event log
//! * [`sim`]: agent-based simulation and trace files
//! * [`config`] / [`cli`]: run configuration and command entry points

pub mod cli;
pub mod config;
pub mod features;
pub mod ledger;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Bundled synthetic dataset (`url,label`).
pub const BUNDLED_DATASET: &str = include_str!("../data/desk.csv");
/// Whois fixture matching [`BUNDLED_DATASET`].
pub const BUNDLED_WHOIS: &str = include_str!("../data/whois.csv");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContributorId(String);

impl ContributorId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ContributorId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for ContributorId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl fmt::Display for ContributorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
