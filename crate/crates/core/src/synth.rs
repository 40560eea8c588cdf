//! Synthetic desk-scale phishing corpus.
//!
//! Rows are independent draws; the label is drawn first (spam with probability 0.45)
//! and each URL trait is sampled from the class-conditional rule below. The classes
//! overlap on purpose so that no linear rule separates them.
//!
//! | trait                  | ham                                  | spam                                   |
//! |------------------------|--------------------------------------|----------------------------------------|
//! | words in domain label  | 1 (70%) or 2                         | 2 (40%), 3 (40%) or 4                  |
//! | words joined by `-`    | 8%                                   | 55%                                    |
//! | subdomains             | 0 (60%), 1 (32%), 2 (8%)             | 0 (25%), 1 (30%), 2 (28%), 3 (17%)     |
//! | `//` in path           | 3%                                   | 25%                                    |
//! | domain age (days)      | 180..7000 (85%), else 0..365         | 0..400 (78%), else 365..3000           |
//!
//! Every registrable label ends with a base-36 row tag, so hosts are unique. Domain
//! ages are published through a whois fixture keyed by host.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FixtureWhois, Label, LabeledUrl};

pub const DEFAULT_ROWS: usize = 2000;
pub const DEFAULT_SEED: u64 = 20_240_611;

const WORDS: &[&str] = &[
    "alpha", "bank", "blue", "book", "cloud", "coin", "data", "deal", "mail", "green", "home", "info", "login",
    "market", "media", "net", "news", "pay", "photo", "prime", "secure", "shop", "smart", "soft", "star", "store",
    "tech", "travel", "verify", "web", "world", "zone",
];
const SUBDOMAINS: &[&str] = &["www", "m", "app", "mail", "account", "update", "signin", "cdn", "my"];
const HAM_TLDS: &[&str] = &["com", "org", "net", "edu", "io"];
const SPAM_TLDS: &[&str] = &["com", "info", "biz", "xyz", "top", "net"];
const PATHS: &[&str] = &["", "index", "about", "login", "news", "products", "account", "help"];

fn base36(mut n: usize) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut out = Vec::new();
    loop {
        out.push(DIGITS[n % 36]);
        n /= 36;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty table")
}

fn weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut x: f64 = rng.gen();
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// One generated row with the domain age that goes into the whois fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRow {
    pub url: LabeledUrl,
    pub host: String,
    pub active_duration_days: u32,
}

pub fn generate(rows: usize, seed: u64) -> Vec<SynthRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|i| generate_row(&mut rng, i)).collect()
}

fn generate_row(rng: &mut ChaCha8Rng, index: usize) -> SynthRow {
    let spam = rng.gen_bool(0.45);
    let label = if spam { Label::Spam } else { Label::Ham };

    let n_words = if spam {
        2 + weighted(rng, &[0.4, 0.4, 0.2])
    } else {
        1 + weighted(rng, &[0.7, 0.3])
    };
    let dash = rng.gen_bool(if spam { 0.55 } else { 0.08 });
    let words: Vec<&str> = (0..n_words).map(|_| pick(rng, WORDS)).collect();
    let mut registrable = words.join(if dash { "-" } else { "" });
    registrable.push_str(&base36(index));

    let n_sub = if spam {
        weighted(rng, &[0.25, 0.30, 0.28, 0.17])
    } else {
        weighted(rng, &[0.60, 0.32, 0.08])
    };
    let tld = pick(rng, if spam { SPAM_TLDS } else { HAM_TLDS });
    let mut labels: Vec<&str> = (0..n_sub).map(|_| pick(rng, SUBDOMAINS)).collect();
    labels.push(&registrable);
    labels.push(tld);
    let host = labels.join(".");

    let redirect = rng.gen_bool(if spam { 0.25 } else { 0.03 });
    let path = pick(rng, PATHS);
    let scheme = if rng.gen_bool(0.5) { "https" } else { "http" };
    let url = if redirect {
        format!("{scheme}://{host}/{path}//{}", pick(rng, WORDS))
    } else {
        format!("{scheme}://{host}/{path}")
    };

    let age = if spam {
        if rng.gen_bool(0.78) {
            rng.gen_range(0..400)
        } else {
            rng.gen_range(365..3000)
        }
    } else if rng.gen_bool(0.85) {
        rng.gen_range(180..7000)
    } else {
        rng.gen_range(0..365)
    };

    SynthRow {
        url: LabeledUrl::new(url, label),
        host,
        active_duration_days: age,
    }
}

pub fn whois_fixture(rows: &[SynthRow]) -> FixtureWhois {
    FixtureWhois::with_entries(rows.iter().map(|r| (r.host.clone(), r.active_duration_days)), 0)
}

pub fn labeled_urls(rows: &[SynthRow]) -> Vec<LabeledUrl> {
    rows.iter().map(|r| r.url.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, WhoisClient};

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(50, 3), generate(50, 3));
        assert_ne!(generate(50, 3), generate(50, 4));
    }

    #[test]
    fn hosts_are_unique_and_parse() {
        let rows = generate(DEFAULT_ROWS, DEFAULT_SEED);
        let whois = whois_fixture(&rows);
        assert_eq!(whois.len(), rows.len());
        for r in &rows {
            let fv = extract_features(&r.url.url, &whois).unwrap();
            assert_eq!(fv.active_duration_days, whois.active_duration_days(&r.host));
        }
    }

    #[test]
    fn base36_digits() {
        assert_eq!(base36(0), "0");
        assert_eq!(base36(35), "z");
        assert_eq!(base36(36), "10");
    }
}
