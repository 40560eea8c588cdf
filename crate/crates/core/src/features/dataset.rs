use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureError;

pub const DATASET_HEADER: &str = "url,label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Ham = 0,
    Spam = 1,
}

impl Label {
    pub fn flipped(self) -> Self {
        match self {
            Label::Ham => Label::Spam,
            Label::Spam => Label::Ham,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self as u8)
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Ham),
            1 => Some(Label::Spam),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// A URL with its spam label; the unit of contribution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledUrl {
    pub url: String,
    pub label: Label,
    pub contributor_hint: Option<String>,
}

impl LabeledUrl {
    pub fn new(url: impl Into<String>, label: Label) -> Self {
        Self {
            url: url.into(),
            label,
            contributor_hint: None,
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            label: self.label.flipped(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetPartition {
    pub base_set: Vec<LabeledUrl>,
    pub good_pool: Vec<LabeledUrl>,
    pub bad_pool: Vec<LabeledUrl>,
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledUrl>, FeatureError> {
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

/// Parses `url,label` CSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_dataset(text: &str) -> Result<Vec<LabeledUrl>, FeatureError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_start_matches('\u{feff}').trim() == DATASET_HEADER => {}
        _ => {
            return Err(FeatureError::Schema {
                line: 1,
                message: format!("expected header `{DATASET_HEADER}`"),
            })
        }
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| FeatureError::Schema { line: line_no, message };
        let mut cols = line.split(',');
        let (Some(url), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(schema("expected exactly two columns".into()));
        };
        let url = url.trim();
        if url.is_empty() {
            return Err(schema("empty url".into()));
        }
        let label = match label.trim() {
            "0" => Label::Ham,
            "1" => Label::Spam,
            other => return Err(schema(format!("label `{other}` is not 0 or 1"))),
        };
        rows.push(LabeledUrl::new(url, label));
    }
    Ok(rows)
}

pub fn write_dataset(rows: &[LabeledUrl]) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}\n", row.url, row.label));
    }
    out
}

/// Drops repeated urls, keeping the first occurrence. Returns the number removed.
pub fn dedup_by_url(rows: &mut Vec<LabeledUrl>) -> usize {
    let before = rows.len();
    let mut seen = HashSet::new();
    rows.retain(|r| seen.insert(r.url.clone()));
    before - rows.len()
}

/// Seeded shuffle, then split into base / good / bad. The bad pool's labels are flipped.
pub fn partition_dataset(
    data: &[LabeledUrl],
    base_fraction: f64,
    good_fraction: f64,
    seed: u64,
) -> Result<DatasetPartition, FeatureError> {
    if !(base_fraction > 0.0 && base_fraction < 1.0)
        || !(0.0..1.0).contains(&good_fraction)
        || base_fraction + good_fraction >= 1.0
    {
        return Err(FeatureError::InvalidFraction(format!(
            "base_fraction={base_fraction} good_fraction={good_fraction}; need 0 < base, 0 <= good, base + good < 1"
        )));
    }
    if data.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let mut seen = HashSet::with_capacity(data.len());
    if let Some(dup) = data.iter().find(|r| !seen.insert(r.url.as_str())) {
        return Err(FeatureError::DuplicateUrl(dup.url.clone()));
    }

    let n = data.len();
    let mut shuffled = data.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_base = ((n as f64) * base_fraction).round() as usize;
    let n_good = (((n as f64) * good_fraction).round() as usize).min(n - n_base.min(n));
    let n_base = n_base.min(n);

    let bad_pool = shuffled.split_off(n_base + n_good);
    let good_pool = shuffled.split_off(n_base);
    Ok(DatasetPartition {
        base_set: shuffled,
        good_pool,
        bad_pool: bad_pool.iter().map(LabeledUrl::flipped).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<LabeledUrl> {
        (0..n)
            .map(|i| {
                let label = if i % 3 == 0 { Label::Spam } else { Label::Ham };
                LabeledUrl::new(format!("http://host{i}.example.com/"), label)
            })
            .collect()
    }

    #[test]
    fn loads_rows_in_order() {
        let data = parse_dataset("url,label\nhttp://a.com,0\nhttp://b.com,1\n").unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].url, "http://a.com");
        assert_eq!(data[1].label, Label::Spam);
    }

    #[test]
    fn bad_label_names_its_line() {
        let text = "url,label\na.com,0\nb.com,1\nc.com,0\nd.com,2\n";
        match parse_dataset(text).unwrap_err() {
            FeatureError::Schema { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_dataset("url,label\n").unwrap().is_empty());
    }

    #[test]
    fn missing_header_is_schema_error() {
        assert!(matches!(
            parse_dataset("a.com,0\n"),
            Err(FeatureError::Schema { line: 1, .. })
        ));
        assert!(parse_dataset("").is_err());
    }

    #[test]
    fn extra_column_is_rejected() {
        assert!(matches!(
            parse_dataset("url,label\na.com,0,x\n"),
            Err(FeatureError::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn load_missing_file_is_io_error() {
        assert!(matches!(
            load_dataset(Path::new("/definitely/not/here.csv")),
            Err(FeatureError::Io { .. })
        ));
    }

    #[test]
    fn partition_sizes() {
        let p = partition_dataset(&rows(100), 0.5, 0.3, 7).unwrap();
        assert_eq!((p.base_set.len(), p.good_pool.len(), p.bad_pool.len()), (50, 30, 20));
    }

    #[test]
    fn partition_is_deterministic() {
        let data = rows(100);
        assert_eq!(
            partition_dataset(&data, 0.5, 0.3, 7).unwrap(),
            partition_dataset(&data, 0.5, 0.3, 7).unwrap()
        );
        assert_ne!(
            partition_dataset(&data, 0.5, 0.3, 7).unwrap(),
            partition_dataset(&data, 0.5, 0.3, 8).unwrap()
        );
    }

    #[test]
    fn bad_pool_labels_are_flipped() {
        let data = rows(60);
        let p = partition_dataset(&data, 0.4, 0.3, 3).unwrap();
        for row in &p.bad_pool {
            let source = data.iter().find(|r| r.url == row.url).unwrap();
            assert_eq!(row.label, source.label.flipped());
        }
    }

    #[test]
    fn invalid_fractions() {
        let data = rows(10);
        for (b, g) in [(0.0, 0.2), (0.6, 0.4), (1.2, 0.0), (0.5, -0.1), (f64::NAN, 0.1)] {
            assert!(matches!(
                partition_dataset(&data, b, g, 1),
                Err(FeatureError::InvalidFraction(_))
            ));
        }
    }

    #[test]
    fn empty_and_duplicate_inputs() {
        assert!(matches!(
            partition_dataset(&[], 0.5, 0.2, 1),
            Err(FeatureError::EmptyDataset)
        ));
        let mut data = rows(5);
        data.push(data[0].clone());
        assert!(matches!(
            partition_dataset(&data, 0.5, 0.2, 1),
            Err(FeatureError::DuplicateUrl(_))
        ));
        assert_eq!(dedup_by_url(&mut data), 1);
        assert!(partition_dataset(&data, 0.5, 0.2, 1).is_ok());
    }

    #[test]
    fn csv_roundtrip() {
        let data = rows(4);
        assert_eq!(parse_dataset(&write_dataset(&data)).unwrap(), data);
    }
}
