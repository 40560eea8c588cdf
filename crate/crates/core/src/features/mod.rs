//! URL feature extraction and labeled-dataset ingestion.
//!
//! Every feature except domain age is computed from the URL string alone. Domain age
//! comes from a [`WhoisClient`]; the offline [`FixtureWhois`] table is the default.

mod dataset;
mod url;
mod whois;

use thiserror::Error;

pub use dataset::{
    dedup_by_url, load_dataset, parse_dataset, partition_dataset, write_dataset, DatasetPartition, Label, LabeledUrl,
    DATASET_HEADER,
};
pub use url::{extract_features, normalize_host, parse_url, FeatureVector, ParsedUrl};
pub use whois::{FixtureWhois, NoopWhois, WhoisClient, WHOIS_FIXTURE_HEADER};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("malformed url `{0}`: no host could be isolated")]
    MalformedUrl(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invalid partition fractions: {0}")]
    InvalidFraction(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate url `{0}` in dataset")]
    DuplicateUrl(String),
}
