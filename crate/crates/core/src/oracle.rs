//! Submission grading.
//!
//! The oracle scores a batch by how much retraining on `production ∪ batch` moves the
//! model's accuracy on the fixed base set, relative to the current production model.
//! Every previously seen url in the batch multiplies the weight by 0.9.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::features::{extract_features, normalize_host, FeatureError, FeatureVector, LabeledUrl, WhoisClient};
use crate::model::{evaluate, train, FeatureMatrix, ModelError, ModelSnapshot, TrainConfig};
use crate::ContributorId;

/// Per-point multiplier applied for every previously seen url.
pub const REPEAT_PENALTY: f64 = 0.9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("submission is empty")]
    EmptySubmission,
    #[error("base accuracy is zero; relative weight undefined")]
    ZeroBaseAccuracy,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Who submitted what, and how often each domain has been seen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubmissionHistory {
    per_contributor: BTreeMap<ContributorId, BTreeSet<String>>,
    global_domain_counts: BTreeMap<String, u32>,
    accepted_urls: BTreeSet<String>,
    seen_urls: BTreeSet<String>,
}

impl SubmissionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn per_contributor(&self) -> &BTreeMap<ContributorId, BTreeSet<String>> {
        &self.per_contributor
    }

    pub fn submitted_by(&self, contributor: &ContributorId) -> Option<&BTreeSet<String>> {
        self.per_contributor.get(contributor)
    }

    pub fn global_domain_counts(&self) -> &BTreeMap<String, u32> {
        &self.global_domain_counts
    }

    pub fn domain_count(&self, domain: &str) -> u32 {
        self.global_domain_counts.get(domain).copied().unwrap_or(0)
    }

    pub fn accepted_urls(&self) -> &BTreeSet<String> {
        &self.accepted_urls
    }

    /// Submitted by anyone, accepted or not.
    pub fn has_seen(&self, url: &str) -> bool {
        self.seen_urls.contains(url)
    }

    pub fn is_accepted(&self, url: &str) -> bool {
        self.accepted_urls.contains(url)
    }

    /// Adds the batch under `contributor` and bumps each url's domain counter.
    /// `accepted_urls` grows only when `accepted`.
    pub fn record(&mut self, contributor: &ContributorId, data: &[LabeledUrl], accepted: bool) {
        let urls = self.per_contributor.entry(contributor.clone()).or_default();
        for point in data {
            urls.insert(point.url.clone());
            self.seen_urls.insert(point.url.clone());
            *self.global_domain_counts.entry(domain_key(&point.url)).or_insert(0) += 1;
            if accepted {
                self.accepted_urls.insert(point.url.clone());
            }
        }
    }
}

/// Counter key for a url: its normalized host, or the trimmed url if no host parses.
pub fn domain_key(url: &str) -> String {
    normalize_host(url).unwrap_or_else(|_| url.trim().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    /// The batch did not raise base-set accuracy (weight zero or below).
    RejectedNegativeWeight,
    /// Every point was already accepted earlier.
    RejectedDuplicate,
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::RejectedNegativeWeight => "rejected-negative-weight",
            Verdict::RejectedDuplicate => "rejected-duplicate",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightReport {
    pub accuracy_base: f64,
    pub accuracy_new: f64,
    pub base_weight: f64,
    pub penalty_factor: f64,
    pub duplicate_divisor: u32,
    pub final_weight: f64,
    pub verdict: Verdict,
}

impl WeightReport {
    /// One-line trace record; field names are stable.
    pub fn to_record(&self) -> String {
        format!(
            "accuracy_base={} accuracy_new={} base_weight={} penalty_factor={} duplicate_divisor={} final_weight={} verdict={}",
            self.accuracy_base,
            self.accuracy_new,
            self.base_weight,
            self.penalty_factor,
            self.duplicate_divisor,
            self.final_weight,
            self.verdict
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DuplicateCheck {
    pub repeat_count: usize,
    pub pure_duplicate: bool,
    pub max_domain_count: u32,
}

impl DuplicateCheck {
    pub fn duplicate_divisor(&self) -> u32 {
        self.max_domain_count.max(1)
    }
}

pub fn check_duplicates(new_data: &[LabeledUrl], history: &SubmissionHistory) -> DuplicateCheck {
    let repeat_count = new_data.iter().filter(|p| history.has_seen(&p.url)).count();
    let pure_duplicate = !new_data.is_empty() && new_data.iter().all(|p| history.is_accepted(&p.url));
    let max_domain_count = new_data
        .iter()
        .map(|p| history.domain_count(&domain_key(&p.url)))
        .max()
        .unwrap_or(0);
    DuplicateCheck {
        repeat_count,
        pure_duplicate,
        max_domain_count,
    }
}

/// A batch with its extracted features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Submission {
    points: Vec<(LabeledUrl, FeatureVector)>,
}

impl Submission {
    pub fn extract(data: &[LabeledUrl], whois: &dyn WhoisClient) -> Result<Self, FeatureError> {
        let points = data
            .iter()
            .map(|p| Ok((p.clone(), extract_features(&p.url, whois)?)))
            .collect::<Result<_, FeatureError>>()?;
        Ok(Self { points })
    }

    pub fn from_parts(points: Vec<(LabeledUrl, FeatureVector)>) -> Self {
        Self { points }
    }

    pub fn urls(&self) -> Vec<LabeledUrl> {
        self.points.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = (FeatureVector, crate::features::Label)> + '_ {
        self.points.iter().map(|(p, fv)| (*fv, p.label))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Everything produced while grading one batch.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: WeightReport,
    pub duplicates: DuplicateCheck,
    pub combined: FeatureMatrix,
    pub new_model: ModelSnapshot,
}

/// Grades `submission` against the current production state.
///
/// `production` is the data the production model `base_model` was trained on; `eval_set`
/// is the fixed base set both accuracies are measured on. `history` is read, never written.
pub fn evaluate_submission(
    submission: &Submission,
    base_model: &ModelSnapshot,
    production: &FeatureMatrix,
    eval_set: &FeatureMatrix,
    history: &SubmissionHistory,
    config: &TrainConfig,
) -> Result<Evaluation, OracleError> {
    if submission.is_empty() {
        return Err(OracleError::EmptySubmission);
    }
    let accuracy_base = evaluate(base_model, eval_set)?;
    let combined = merge_accepted(production, submission);
    let new_model = train(&combined, config)?;
    let accuracy_new = evaluate(&new_model, eval_set)?;
    let urls = submission.urls();
    let (report, duplicates) = weigh(accuracy_base, accuracy_new, &urls, history)?;

    Ok(Evaluation {
        report,
        duplicates,
        new_model: new_model.with_base_accuracy(accuracy_new),
        combined,
    })
}

/// Turns a pair of base-set accuracies into a weight and verdict for `new_data`.
pub fn weigh(
    accuracy_base: f64,
    accuracy_new: f64,
    new_data: &[LabeledUrl],
    history: &SubmissionHistory,
) -> Result<(WeightReport, DuplicateCheck), OracleError> {
    if accuracy_base <= 0.0 {
        return Err(OracleError::ZeroBaseAccuracy);
    }
    let base_weight = (accuracy_new - accuracy_base) / accuracy_base;

    let mut penalty_factor = 1.0;
    for point in new_data {
        if history.has_seen(&point.url) {
            penalty_factor *= REPEAT_PENALTY;
        }
    }
    let final_weight = base_weight * penalty_factor;

    let duplicates = check_duplicates(new_data, history);
    let verdict = if duplicates.pure_duplicate {
        Verdict::RejectedDuplicate
    } else if final_weight > 0.0 {
        Verdict::Accepted
    } else {
        Verdict::RejectedNegativeWeight
    };
    let report = WeightReport {
        accuracy_base,
        accuracy_new,
        base_weight,
        penalty_factor,
        duplicate_divisor: duplicates.duplicate_divisor(),
        final_weight,
        verdict,
    };
    Ok((report, duplicates))
}

pub fn calculate_weight(
    submission: &Submission,
    base_model: &ModelSnapshot,
    production: &FeatureMatrix,
    eval_set: &FeatureMatrix,
    history: &SubmissionHistory,
    config: &TrainConfig,
) -> Result<WeightReport, OracleError> {
    evaluate_submission(submission, base_model, production, eval_set, history, config).map(|e| e.report)
}

pub fn merge_accepted(base_data: &FeatureMatrix, submission: &Submission) -> FeatureMatrix {
    base_data.extended(submission.rows())
}

/// Serial grader holding the production dataset and model.
///
/// Batches must be graded and merged in arrival order; the oracle is a single consumer.
pub struct Oracle {
    whois: Arc<dyn WhoisClient>,
    eval_set: FeatureMatrix,
    production: FeatureMatrix,
    model: ModelSnapshot,
    config: TrainConfig,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("eval_rows", &self.eval_set.len())
            .field("production_rows", &self.production.len())
            .field("accuracy", &self.model.base_accuracy)
            .finish()
    }
}

impl Oracle {
    pub fn new(base_set: &[LabeledUrl], whois: Arc<dyn WhoisClient>, config: TrainConfig) -> Result<Self, OracleError> {
        let submission = Submission::extract(base_set, whois.as_ref())?;
        let eval_set = FeatureMatrix::new(submission.rows().collect());
        let model = train(&eval_set, &config)?;
        Ok(Self {
            whois,
            production: eval_set.clone(),
            eval_set,
            model,
            config,
        })
    }

    pub fn grade(&self, data: &[LabeledUrl], history: &SubmissionHistory) -> Result<Evaluation, OracleError> {
        if data.is_empty() {
            return Err(OracleError::EmptySubmission);
        }
        let submission = Submission::extract(data, self.whois.as_ref())?;
        evaluate_submission(
            &submission,
            &self.model,
            &self.production,
            &self.eval_set,
            history,
            &self.config,
        )
    }

    /// Adopts the retrained model and its training rows. Only accepted batches belong here.
    pub fn merge(&mut self, evaluation: Evaluation) {
        debug_assert!(evaluation.report.verdict.is_accepted());
        self.production = evaluation.combined;
        self.model = evaluation.new_model;
    }

    pub fn model(&self) -> &ModelSnapshot {
        &self.model
    }

    pub fn production(&self) -> &FeatureMatrix {
        &self.production
    }

    pub fn eval_set(&self) -> &FeatureMatrix {
        &self.eval_set
    }

    /// Current production model's accuracy on the base set.
    pub fn accuracy(&self) -> f64 {
        self.model.base_accuracy
    }

    pub fn whois(&self) -> &dyn WhoisClient {
        self.whois.as_ref()
    }
}
