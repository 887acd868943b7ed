//! Samples, datasets, sub-population conditions, classifiers and cost models.
//!
//! Everything here is an immutable value once constructed; constructors
//! validate the invariants so downstream modules can rely on them.

mod classifier;
mod cost;

pub use classifier::{Classifier, LinearClassifier, ThresholdClassifier};
pub use cost::{Cost1D, CostModel, CostModel1D, CustomCost, LinearCostMultiD, QuadraticCostMultiD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary protected attribute. Group 0 is the disadvantaged group throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Zero, Group::One];

    pub fn index(self) -> usize {
        match self {
            Group::Zero => 0,
            Group::One => 1,
        }
    }

    pub fn from_index(z: u8) -> Result<Group> {
        match z {
            0 => Ok(Group::Zero),
            1 => Ok(Group::One),
            other => Err(Error::Invalid(format!("group must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// `true` iff y = 1.
    pub label: bool,
    pub group: Group,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: bool, group: Group) -> Self {
        Self {
            features,
            label,
            group,
        }
    }

    /// One-feature convenience constructor with integer y and z.
    pub fn scalar(x: f64, y: u8, z: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::Invalid(format!("label must be 0 or 1, got {y}")));
        }
        Ok(Self::new(vec![x], y == 1, Group::from_index(z)?))
    }

    pub fn y(&self) -> u8 {
        self.label as u8
    }
}

/// Per-feature `(mean, std)` captured from a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub manipulable: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Schema {
    pub fn new(feature_names: Vec<String>, manipulable: Vec<bool>) -> Result<Self> {
        if feature_names.len() != manipulable.len() {
            return Err(Error::Schema(format!(
                "{} feature names but {} manipulability flags",
                feature_names.len(),
                manipulable.len()
            )));
        }
        if feature_names.is_empty() {
            return Err(Error::Schema("schema needs at least one feature".into()));
        }
        for reserved in ["y", "z"] {
            if feature_names.iter().any(|n| n == reserved) {
                return Err(Error::Schema(format!(
                    "feature name `{reserved}` is reserved"
                )));
            }
        }
        Ok(Self {
            feature_names,
            manipulable,
            normalization: None,
        })
    }

    /// Every feature manipulable, named `x`, `x1`, `x2`, ...
    pub fn anonymous(dim: usize) -> Self {
        let names = if dim == 1 {
            vec!["x".to_string()]
        } else {
            (1..=dim).map(|i| format!("x{i}")).collect()
        };
        Self {
            feature_names: names,
            manipulable: vec![true; dim],
            normalization: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn with_normalization(mut self, norm: Normalization) -> Result<Self> {
        if norm.mean.len() != self.dim() || norm.std.len() != self.dim() {
            return Err(Error::Schema(
                "normalization length does not match schema".into(),
            ));
        }
        if let Some(i) = norm.std.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Schema(format!(
                "normalization std for `{}` must be positive",
                self.feature_names[i]
            )));
        }
        self.normalization = Some(norm);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(schema: Schema, samples: Vec<Sample>) -> Result<Self> {
        let dim = schema.dim();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Schema(format!(
                    "sample {i} has {} features, schema declares {dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "sample {i} has a non-finite feature"
                )));
            }
        }
        Ok(Self { schema, samples })
    }

    /// One-dimensional dataset from `(x, y, z)` triples.
    pub fn from_scalar(rows: &[(f64, u8, u8)]) -> Result<Self> {
        let samples = rows
            .iter()
            .map(|&(x, y, z)| Sample::scalar(x, y, z))
            .collect::<Result<Vec<_>>>()?;
        Self::new(Schema::anonymous(1), samples)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn group_count(&self, group: Group) -> usize {
        self.samples.iter().filter(|s| s.group == group).count()
    }

    pub fn into_parts(self) -> (Schema, Vec<Sample>) {
        (self.schema, self.samples)
    }

    /// Subset by sample indices, keeping the schema.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Sub-population condition ψ(x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubPopCondition {
    /// ψ ≡ 1; the selection-rate gap is the statistical rate.
    #[serde(rename = "sr")]
    All,
    /// ψ = 1(y = 1); the selection-rate gap is the true positive rate disparity.
    #[serde(rename = "tpr")]
    PositiveLabel,
}

impl SubPopCondition {
    pub fn evaluate(self, _features: &[f64], label: bool) -> bool {
        match self {
            SubPopCondition::All => true,
            SubPopCondition::PositiveLabel => label,
        }
    }

    pub fn holds(self, sample: &Sample) -> bool {
        self.evaluate(&sample.features, sample.label)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            SubPopCondition::All => "sr",
            SubPopCondition::PositiveLabel => "tpr",
        }
    }
}

impl std::str::FromStr for SubPopCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sr" | "all" => Ok(SubPopCondition::All),
            "tpr" | "positive" => Ok(SubPopCondition::PositiveLabel),
            other => Err(Error::Invalid(format!(
                "unknown sub-population condition `{other}`"
            ))),
        }
    }
}

/// ψ evaluated on a sample, as 0 or 1.
pub fn evaluate_psi(condition: SubPopCondition, sample: &Sample) -> u8 {
    condition.holds(sample) as u8
}

/// Decision of `classifier` on `sample`, as 0 or 1.
pub fn classify(classifier: &Classifier, sample: &Sample) -> Result<u8> {
    classifier.classify(sample).map(u8::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        let neg = Sample::scalar(7.0, 0, 0).unwrap();
        let pos = Sample::scalar(7.0, 1, 0).unwrap();
        assert_eq!(evaluate_psi(SubPopCondition::All, &neg), 1);
        assert_eq!(evaluate_psi(SubPopCondition::PositiveLabel, &neg), 0);
        assert_eq!(evaluate_psi(SubPopCondition::PositiveLabel, &pos), 1);
    }

    #[test]
    fn classify_examples() {
        let thr = Classifier::Threshold(ThresholdClassifier::new(3.0, 3.0));
        assert_eq!(
            classify(&thr, &Sample::scalar(3.0, 0, 0).unwrap()).unwrap(),
            1
        );
        assert_eq!(
            classify(&thr, &Sample::scalar(2.0, 0, 1).unwrap()).unwrap(),
            0
        );

        let lin = Classifier::Linear(LinearClassifier::new(vec![1.0, 2.0], 5.0, 5.0));
        let s = Sample::new(vec![1.0, 2.0], false, Group::Zero);
        assert_eq!(classify(&lin, &s).unwrap(), 1);
    }

    #[test]
    fn classify_rejects_dimension_mismatch() {
        let lin = Classifier::Linear(LinearClassifier::new(vec![1.0, 2.0], 5.0, 5.0));
        let s = Sample::scalar(1.0, 0, 0).unwrap();
        assert!(matches!(classify(&lin, &s), Err(Error::Schema(_))));
        let thr = Classifier::Threshold(ThresholdClassifier::new(1.0, 1.0));
        let s2 = Sample::new(vec![1.0, 2.0], false, Group::One);
        assert!(matches!(classify(&thr, &s2), Err(Error::Schema(_))));
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        assert!(Dataset::from_scalar(&[(1.0, 2, 0)]).is_err());
        assert!(Dataset::from_scalar(&[(1.0, 0, 3)]).is_err());
        let schema = Schema::anonymous(2);
        let bad = Sample::new(vec![1.0], true, Group::One);
        assert!(matches!(
            Dataset::new(schema, vec![bad]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn normalization_std_must_be_positive() {
        let schema = Schema::anonymous(2);
        let norm = Normalization {
            mean: vec![0.0, 0.0],
            std: vec![1.0, 0.0],
        };
        assert!(schema.with_normalization(norm).is_err());
    }
}
