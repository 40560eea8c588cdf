use std::fmt;

use super::whois::WhoisClient;
use super::FeatureError;

/// The five per-URL signals the classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    pub domain_length: u32,
    pub has_dash: bool,
    pub is_redirect: bool,
    pub num_subdomains: u32,
    pub active_duration_days: u32,
}

impl FeatureVector {
    pub const LEN: usize = 5;
    pub const NAMES: [&'static str; Self::LEN] = [
        "domain_length",
        "has_dash",
        "is_redirect",
        "num_subdomains",
        "active_duration_days",
    ];

    /// Raw (unscaled) numeric view in `NAMES` order.
    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            f64::from(self.domain_length),
            f64::from(u8::from(self.has_dash)),
            f64::from(u8::from(self.is_redirect)),
            f64::from(self.num_subdomains),
            f64::from(self.active_duration_days),
        ]
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "domain_length={} has_dash={} is_redirect={} num_subdomains={} active_duration_days={}",
            self.domain_length,
            u8::from(self.has_dash),
            u8::from(self.is_redirect),
            self.num_subdomains,
            self.active_duration_days
        )
    }
}

/// A URL split into its normalized host and everything that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedUrl<'a> {
    pub host: String,
    pub rest: &'a str,
}

/// Isolates the host: text after `://` (when present) up to the first `/`, `?`, `#` or `:`.
/// The host is lowercased and a single trailing dot is dropped.
pub fn parse_url(url: &str) -> Result<ParsedUrl<'_>, FeatureError> {
    let trimmed = url.trim();
    let malformed = || FeatureError::MalformedUrl(url.to_string());
    if trimmed.is_empty() {
        return Err(malformed());
    }
    let after_scheme = match trimmed.find("://") {
        Some(idx) => &trimmed[idx + 3..],
        None => trimmed,
    };
    let end = after_scheme.find(['/', '?', '#', ':']).unwrap_or(after_scheme.len());
    let raw_host = &after_scheme[..end];
    let rest = &after_scheme[end..];

    let mut host = raw_host.to_lowercase();
    if host.ends_with('.') {
        host.pop();
    }
    if !is_valid_host(&host) {
        return Err(malformed());
    }
    Ok(ParsedUrl { host, rest })
}

fn is_valid_host(host: &str) -> bool {
    !host.is_empty()
        && host
            .split('.')
            .all(|label| !label.is_empty() && label.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '_'))
}

/// Normalized host of `url`; the key used for domain counters and whois lookups.
pub fn normalize_host(url: &str) -> Result<String, FeatureError> {
    parse_url(url).map(|p| p.host)
}

pub fn extract_features(url: &str, whois: &dyn WhoisClient) -> Result<FeatureVector, FeatureError> {
    let parsed = parse_url(url)?;
    let host = parsed.host.as_str();
    let labels = host.split('.').count() as u32;
    Ok(FeatureVector {
        domain_length: host.chars().count() as u32,
        has_dash: host.contains('-'),
        is_redirect: parsed.rest.contains("//"),
        num_subdomains: labels.saturating_sub(2),
        active_duration_days: whois.active_duration_days(host),
    })
}
