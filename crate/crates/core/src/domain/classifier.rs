use serde::{Deserialize, Serialize};

use super::{Group, Sample};
use crate::error::{Error, Result};
use crate::numeric::dot;

/// One-feature classifier with a threshold per group: positive iff x ≥ τ_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub tau0: f64,
    pub tau1: f64,
}

impl ThresholdClassifier {
    pub fn new(tau0: f64, tau1: f64) -> Self {
        Self { tau0, tau1 }
    }

    pub fn shared(tau: f64) -> Self {
        Self::new(tau, tau)
    }

    pub fn threshold(&self, group: Group) -> f64 {
        match group {
            Group::Zero => self.tau0,
            Group::One => self.tau1,
        }
    }

    #[inline]
    pub fn decide(&self, x: f64, group: Group) -> bool {
        x >= self.threshold(group)
    }
}

/// Linear classifier with group-specific offsets: positive iff uᵀx ≥ v_z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub u: Vec<f64>,
    pub v0: f64,
    pub v1: f64,
}

impl LinearClassifier {
    pub fn new(u: Vec<f64>, v0: f64, v1: f64) -> Self {
        Self { u, v0, v1 }
    }

    /// Packs `(u, v0, v1)` into the flat parameter layout used by training.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = self.u.clone();
        p.push(self.v0);
        p.push(self.v1);
        p
    }

    pub fn from_params(params: &[f64]) -> Self {
        let n = params.len() - 2;
        Self::new(params[..n].to_vec(), params[n], params[n + 1])
    }

    pub fn offset(&self, group: Group) -> f64 {
        match group {
            Group::Zero => self.v0,
            Group::One => self.v1,
        }
    }

    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.u, x)
    }

    #[inline]
    pub fn decide(&self, x: &[f64], group: Group) -> bool {
        self.score(x) >= self.offset(group)
    }
}

/// Either classifier family, serialized with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Threshold(ThresholdClassifier),
    Linear(LinearClassifier),
}

impl Classifier {
    /// Number of features the classifier reads.
    pub fn dim(&self) -> usize {
        match self {
            Classifier::Threshold(_) => 1,
            Classifier::Linear(l) => l.u.len(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Schema(format!(
                "classifier expects {} features, data has {dim}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn classify(&self, sample: &Sample) -> Result<bool> {
        self.check_dim(sample.features.len())?;
        Ok(self.decide(&sample.features, sample.group))
    }

    /// Decision without the dimension check.
    #[inline]
    pub fn decide(&self, x: &[f64], group: Group) -> bool {
        match self {
            Classifier::Threshold(t) => t.decide(x[0], group),
            Classifier::Linear(l) => l.decide(x, group),
        }
    }

    /// One-dimensional score the decision thresholds: x itself, or uᵀx.
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Threshold(_) => x[0],
            Classifier::Linear(l) => l.score(x),
        }
    }

    /// Decision boundary on the score scale: τ_z or v_z.
    pub fn boundary(&self, group: Group) -> f64 {
        match self {
            Classifier::Threshold(t) => t.threshold(group),
            Classifier::Linear(l) => l.offset(group),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl From<ThresholdClassifier> for Classifier {
    fn from(c: ThresholdClassifier) -> Self {
        Classifier::Threshold(c)
    }
}

impl From<LinearClassifier> for Classifier {
    fn from(c: LinearClassifier) -> Self {
        Classifier::Linear(c)
    }
}
