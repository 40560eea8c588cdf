use std::collections::HashMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::FeatureError;

pub const WHOIS_FIXTURE_HEADER: &str = "domain,active_duration_days";

/// Source of domain age. Implementations must be shareable for concurrent read-only lookups.
pub trait WhoisClient: Send + Sync {
    /// Days between registration and the client's reference date.
    fn active_duration_days(&self, domain: &str) -> u32;
}

/// Always reports zero days.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopWhois;

impl WhoisClient for NoopWhois {
    fn active_duration_days(&self, _domain: &str) -> u32 {
        0
    }
}

/// Offline lookup table.
///
/// Lookups try the exact host first, then its last two labels (the registrable pair),
/// and fall back to `default_days` for unknown domains.
#[derive(Debug, Clone, Default)]
pub struct FixtureWhois {
    table: HashMap<String, u32>,
    default_days: u32,
}

impl FixtureWhois {
    pub fn new(default_days: u32) -> Self {
        Self {
            table: HashMap::new(),
            default_days,
        }
    }

    pub fn with_entries<I, S>(entries: I, default_days: u32) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut fixture = Self::new(default_days);
        for (domain, days) in entries {
            fixture.insert(domain, days);
        }
        fixture
    }

    /// Builds the table from registration dates; dates after `reference` clamp to 0 days.
    pub fn from_registrations<I, S>(reference: NaiveDate, entries: I, default_days: u32) -> Self
    where
        I: IntoIterator<Item = (S, NaiveDate)>,
        S: Into<String>,
    {
        Self::with_entries(
            entries.into_iter().map(|(domain, registered)| {
                let days = (reference - registered).num_days().max(0);
                (domain, u32::try_from(days).unwrap_or(u32::MAX))
            }),
            default_days,
        )
    }

    pub fn insert(&mut self, domain: impl Into<String>, days: u32) {
        self.table.insert(domain.into().to_lowercase(), days);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn default_days(&self) -> u32 {
        self.default_days
    }

    pub fn load(path: &Path, default_days: u32) -> Result<Self, FeatureError> {
        let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, default_days)
    }

    pub fn parse(text: &str, default_days: u32) -> Result<Self, FeatureError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == WHOIS_FIXTURE_HEADER => {}
            _ => {
                return Err(FeatureError::Schema {
                    line: 1,
                    message: format!("expected header `{WHOIS_FIXTURE_HEADER}`"),
                })
            }
        }
        let mut fixture = Self::new(default_days);
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (domain, days) = line.split_once(',').ok_or_else(|| FeatureError::Schema {
                line: line_no,
                message: "expected two columns".into(),
            })?;
            let days = days.trim().parse::<u32>().map_err(|_| FeatureError::Schema {
                line: line_no,
                message: format!("active_duration_days `{}` is not a non-negative integer", days.trim()),
            })?;
            let domain = domain.trim();
            if domain.is_empty() {
                return Err(FeatureError::Schema {
                    line: line_no,
                    message: "empty domain".into(),
                });
            }
            fixture.insert(domain, days);
        }
        Ok(fixture)
    }

    /// Serializes in the fixture file format, rows sorted by domain.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<_> = self.table.iter().collect();
        rows.sort();
        let mut out = String::from(WHOIS_FIXTURE_HEADER);
        out.push('\n');
        for (domain, days) in rows {
            out.push_str(&format!("{domain},{days}\n"));
        }
        out
    }
}

impl WhoisClient for FixtureWhois {
    fn active_duration_days(&self, domain: &str) -> u32 {
        let domain = domain.to_lowercase();
        if let Some(days) = self.table.get(&domain) {
            return *days;
        }
        let labels: Vec<&str> = domain.split('.').collect();
        if labels.len() > 2 {
            let registrable = labels[labels.len() - 2..].join(".");
            if let Some(days) = self.table.get(&registrable) {
                return *days;
            }
        }
        self.default_days
    }
}
