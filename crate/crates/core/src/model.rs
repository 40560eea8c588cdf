//! L2-regularized logistic regression trained by full-batch gradient descent.
//!
//! Training is deterministic: zero initialization, fixed learning rate and a fixed
//! iteration count. Features are min-max scaled with statistics taken from the
//! training rows only; the scaling travels with the [`ModelSnapshot`].

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, Label};

const DIM: usize = FeatureVector::LEN;

/// Number of trainable parameters: one coefficient per feature plus the intercept.
pub const PARAM_COUNT: usize = DIM + 1;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no rows to train or evaluate on")]
    EmptyData,
    #[error("degenerate training data: only one class present")]
    DegenerateData,
    #[error("sample size {size} exceeds the {rows} available rows")]
    SizeTooLarge { size: usize, rows: usize },
    #[error("sample size {size} leaves no held-out rows")]
    HoldoutEmpty { size: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("cannot parse model record: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "l2 must be non-negative, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// Per-feature `(min, max)` used to map raw features onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub min: [f64; DIM],
    pub max: [f64; DIM],
}

impl Default for Scaling {
    fn default() -> Self {
        Self {
            min: [0.0; DIM],
            max: [0.0; DIM],
        }
    }
}

impl Scaling {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut min = [f64::INFINITY; DIM];
        let mut max = [f64::NEG_INFINITY; DIM];
        let mut any = false;
        for fv in rows {
            any = true;
            for (j, v) in fv.to_array().into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if any {
            Self { min, max }
        } else {
            Self::default()
        }
    }

    /// Constant features map to 0.
    pub fn apply(&self, fv: &FeatureVector) -> [f64; DIM] {
        let raw = fv.to_array();
        std::array::from_fn(|j| {
            let span = self.max[j] - self.min[j];
            if span > 0.0 {
                (raw[j] - self.min[j]) / span
            } else {
                0.0
            }
        })
    }
}

/// Labeled feature rows plus the scaling derived from them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    rows: Vec<(FeatureVector, Label)>,
    scaling: Scaling,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<(FeatureVector, Label)>) -> Self {
        let scaling = Scaling::fit(rows.iter().map(|(fv, _)| fv));
        Self { rows, scaling }
    }

    pub fn rows(&self) -> &[(FeatureVector, Label)] {
        &self.rows
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends rows and refits the scaling.
    pub fn extended(&self, more: impl IntoIterator<Item = (FeatureVector, Label)>) -> Self {
        let mut rows = self.rows.clone();
        rows.extend(more);
        Self::new(rows)
    }

    /// Same features with every label flipped.
    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows.iter().map(|(fv, l)| (*fv, l.flipped())).collect(),
            scaling: self.scaling,
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let spam = self.rows.iter().filter(|(_, l)| *l == Label::Spam).count();
        spam > 0 && spam < self.rows.len()
    }

    /// Frequency of the most common label.
    pub fn majority_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let spam = self.rows.iter().filter(|(_, l)| *l == Label::Spam).count();
        spam.max(self.rows.len() - spam) as f64 / self.rows.len() as f64
    }

    fn scaled(&self) -> Vec<([f64; DIM], f64)> {
        self.rows
            .iter()
            .map(|(fv, l)| (self.scaling.apply(fv), l.as_f64()))
            .collect()
    }
}

/// A trained classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub coefficients: [f64; DIM],
    pub intercept: f64,
    pub scaling: Scaling,
    pub training_size: usize,
    pub base_accuracy: f64,
}

impl ModelSnapshot {
    pub fn params(&self) -> [f64; PARAM_COUNT] {
        let mut p = [0.0; PARAM_COUNT];
        p[..DIM].copy_from_slice(&self.coefficients);
        p[DIM] = self.intercept;
        p
    }

    pub fn score(&self, features: &FeatureVector) -> f64 {
        self.score_scaled(&self.scaling.apply(features))
    }

    pub fn score_scaled(&self, x: &[f64; DIM]) -> f64 {
        sigmoid(linear(&self.params(), x))
    }

    pub fn predict_scaled(&self, x: &[f64; DIM]) -> Label {
        label_for_score(self.score_scaled(x))
    }

    pub fn with_base_accuracy(mut self, accuracy: f64) -> Self {
        self.base_accuracy = accuracy;
        self
    }

    /// Single-line `name=v1,v2,...` record, fields separated by spaces.
    pub fn to_record(&self) -> String {
        fn list(values: &[f64]) -> String {
            values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        }
        format!(
            "coefficients={} intercept={} scale_min={} scale_max={} training_size={} base_accuracy={}",
            list(&self.coefficients),
            self.intercept,
            list(&self.scaling.min),
            list(&self.scaling.max),
            self.training_size,
            self.base_accuracy
        )
    }

    pub fn from_record(record: &str) -> Result<Self, ModelError> {
        let mut coefficients = None;
        let mut intercept = None;
        let mut scale_min = None;
        let mut scale_max = None;
        let mut training_size = None;
        let mut base_accuracy = None;

        fn parse_list(v: &str) -> Result<[f64; DIM], ModelError> {
            let values = v
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| ModelError::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            values
                .try_into()
                .map_err(|v: Vec<f64>| ModelError::Parse(format!("expected {DIM} values, got {}", v.len())))
        }
        fn parse_one<T: FromStr>(v: &str) -> Result<T, ModelError>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| ModelError::Parse(format!("`{v}`: {e}")))
        }

        for field in record.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| ModelError::Parse(format!("field `{field}` has no `=`")))?;
            match key {
                "coefficients" => coefficients = Some(parse_list(value)?),
                "intercept" => intercept = Some(parse_one(value)?),
                "scale_min" => scale_min = Some(parse_list(value)?),
                "scale_max" => scale_max = Some(parse_list(value)?),
                "training_size" => training_size = Some(parse_one(value)?),
                "base_accuracy" => base_accuracy = Some(parse_one(value)?),
                other => return Err(ModelError::Parse(format!("unknown field `{other}`"))),
            }
        }
        let missing = |name: &str| ModelError::Parse(format!("missing field `{name}`"));
        Ok(Self {
            coefficients: coefficients.ok_or_else(|| missing("coefficients"))?,
            intercept: intercept.ok_or_else(|| missing("intercept"))?,
            scaling: Scaling {
                min: scale_min.ok_or_else(|| missing("scale_min"))?,
                max: scale_max.ok_or_else(|| missing("scale_max"))?,
            },
            training_size: training_size.ok_or_else(|| missing("training_size"))?,
            base_accuracy: base_accuracy.ok_or_else(|| missing("base_accuracy"))?,
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(params: &[f64; PARAM_COUNT], x: &[f64; DIM]) -> f64 {
    x.iter().zip(params).map(|(xi, wi)| xi * wi).sum::<f64>() + params[DIM]
}

/// Ties at exactly 0.5 go to spam.
fn label_for_score(score: f64) -> Label {
    if score >= 0.5 {
        Label::Spam
    } else {
        Label::Ham
    }
}

/// Mean cross-entropy plus `l2 / 2 * |w|^2` over min-max scaled rows (intercept unpenalized).
pub struct LogisticObjective {
    rows: Vec<([f64; DIM], f64)>,
    l2: f64,
}

impl LogisticObjective {
    pub fn new(data: &FeatureMatrix, l2: f64) -> Self {
        Self {
            rows: data.scaled(),
            l2,
        }
    }

    pub fn value(&self, params: &[f64; PARAM_COUNT]) -> f64 {
        let n = self.rows.len() as f64;
        let loss: f64 = self
            .rows
            .iter()
            .map(|(x, y)| {
                let z = linear(params, x);
                softplus(z) - y * z
            })
            .sum();
        let penalty: f64 = params[..DIM].iter().map(|w| w * w).sum();
        loss / n + 0.5 * self.l2 * penalty
    }

    pub fn gradient(&self, params: &[f64; PARAM_COUNT]) -> [f64; PARAM_COUNT] {
        let n = self.rows.len() as f64;
        let mut grad = [0.0; PARAM_COUNT];
        for (x, y) in &self.rows {
            let residual = sigmoid(linear(params, x)) - y;
            for j in 0..DIM {
                grad[j] += residual * x[j];
            }
            grad[DIM] += residual;
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if j < DIM {
                *g += self.l2 * params[j];
            }
        }
        grad
    }
}

pub fn train(data: &FeatureMatrix, config: &TrainConfig) -> Result<ModelSnapshot, ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    if !data.has_both_classes() {
        return Err(ModelError::DegenerateData);
    }
    let objective = LogisticObjective::new(data, config.l2);
    let mut params = [0.0; PARAM_COUNT];
    for _ in 0..config.iterations {
        let grad = objective.gradient(&params);
        for (p, g) in params.iter_mut().zip(grad) {
            *p -= config.learning_rate * g;
        }
    }
    let mut coefficients = [0.0; DIM];
    coefficients.copy_from_slice(&params[..DIM]);
    let model = ModelSnapshot {
        coefficients,
        intercept: params[DIM],
        scaling: *data.scaling(),
        training_size: data.len(),
        base_accuracy: 0.0,
    };
    let accuracy = evaluate(&model, data)?;
    Ok(model.with_base_accuracy(accuracy))
}

pub fn predict(model: &ModelSnapshot, features: &FeatureVector) -> Label {
    label_for_score(model.score(features))
}

/// Fraction of rows whose label the model predicts correctly.
pub fn evaluate(model: &ModelSnapshot, data: &FeatureMatrix) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let correct = data
        .rows()
        .iter()
        .filter(|(fv, label)| predict(model, fv) == *label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Accuracy versus training-sample size.
///
/// One seeded permutation of the rows is drawn; for each size the first `size` rows
/// train the model and the remaining rows are the holdout.
pub fn accuracy_curve(
    data: &FeatureMatrix,
    sizes: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let n = data.len();
    for &size in sizes {
        if size > n {
            return Err(ModelError::SizeTooLarge { size, rows: n });
        }
        if size == n {
            return Err(ModelError::HoldoutEmpty { size });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let permuted: Vec<_> = order.iter().map(|&i| data.rows()[i]).collect();

    sizes
        .iter()
        .map(|&size| {
            let train_rows = FeatureMatrix::new(permuted[..size].to_vec());
            let holdout = FeatureMatrix::new(permuted[size..].to_vec());
            let model = train(&train_rows, config)?;
            Ok((size, evaluate(&model, &holdout)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(len: u32, dash: bool, age: u32) -> FeatureVector {
        FeatureVector {
            domain_length: len,
            has_dash: dash,
            is_redirect: false,
            num_subdomains: 0,
            active_duration_days: age,
        }
    }

    fn toy() -> FeatureMatrix {
        FeatureMatrix::new(vec![
            (fv(10, false, 4000), Label::Ham),
            (fv(12, false, 3000), Label::Ham),
            (fv(30, true, 20), Label::Spam),
            (fv(35, true, 5), Label::Spam),
        ])
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let model = train(&toy(), &TrainConfig::default()).unwrap();
        assert_eq!(evaluate(&model, &toy()).unwrap(), 1.0);
        assert_eq!(model.training_size, 4);
        assert_eq!(model.base_accuracy, 1.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = FeatureMatrix::new(vec![(fv(30, true, 1), Label::Spam), (fv(31, true, 2), Label::Spam)]);
        assert_eq!(train(&data, &TrainConfig::default()), Err(ModelError::DegenerateData));
        assert_eq!(
            train(&FeatureMatrix::default(), &TrainConfig::default()),
            Err(ModelError::EmptyData)
        );
    }

    #[test]
    fn training_is_bit_identical() {
        let a = train(&toy(), &TrainConfig::default()).unwrap();
        let b = train(&toy(), &TrainConfig::default()).unwrap();
        assert_eq!(a.params().map(f64::to_bits), b.params().map(f64::to_bits));
    }

    #[test]
    fn threshold_rule() {
        let mut model = train(&toy(), &TrainConfig::default()).unwrap();
        model.coefficients = [0.0; DIM];
        let x = fv(1, false, 1);
        model.intercept = (0.9f64 / 0.1).ln();
        assert_eq!(predict(&model, &x), Label::Spam);
        model.intercept = (0.1f64 / 0.9).ln();
        assert_eq!(predict(&model, &x), Label::Ham);
        model.intercept = 0.0;
        assert_eq!(model.score(&x), 0.5);
        assert_eq!(predict(&model, &x), Label::Spam);
    }

    #[test]
    fn all_right_and_all_wrong() {
        let model = train(&toy(), &TrainConfig::default()).unwrap();
        assert_eq!(evaluate(&model, &toy()).unwrap(), 1.0);
        assert_eq!(evaluate(&model, &toy().complement()).unwrap(), 0.0);
        assert_eq!(evaluate(&model, &FeatureMatrix::default()), Err(ModelError::EmptyData));
    }

    #[test]
    fn curve_size_errors() {
        let data = toy();
        assert_eq!(
            accuracy_curve(&data, &[4], &TrainConfig::default(), 1),
            Err(ModelError::HoldoutEmpty { size: 4 })
        );
        assert_eq!(
            accuracy_curve(&data, &[5], &TrainConfig::default(), 1),
            Err(ModelError::SizeTooLarge { size: 5, rows: 4 })
        );
    }

    #[test]
    fn record_roundtrip_is_exact() {
        let model = train(&toy(), &TrainConfig::default()).unwrap();
        let back = ModelSnapshot::from_record(&model.to_record()).unwrap();
        assert_eq!(back, model);
        assert!(ModelSnapshot::from_record("intercept=1").is_err());
        assert!(ModelSnapshot::from_record("bogus").is_err());
    }

    #[test]
    fn invalid_config() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&toy(), &cfg), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn constant_feature_scales_to_zero() {
        let s = Scaling::fit([&fv(5, false, 9), &fv(5, false, 9)]);
        assert_eq!(s.apply(&fv(5, false, 9)), [0.0; DIM]);
    }
}
