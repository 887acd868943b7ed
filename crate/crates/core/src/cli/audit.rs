use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, AuditCost, FeatureCosts};
use super::output::{ensure_dir, num, opt, Provenance};
use crate::bounds::{
    burden_gap_bounds_1d, burden_gap_exact_linear, burden_gap_upper_quadratic, constraint_lhs_1d,
    BoundsReport,
};
use crate::datagen::{apply_normalization, load_csv_dataset};
use crate::domain::{Classifier, CostModel, CostModel1D, Dataset, Normalization, SubPopCondition};
use crate::error::{Error, Result};
use crate::metrics::{metrics_report, MetricsReport};
use crate::response::{FeatureRange, ResponseSemantics};

/// A classifier file as written by `train`: the classifier, the normalization
/// fitted on its training partition, and free-form metadata. A bare classifier
/// object is also accepted on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierArtifact {
    pub classifier: Classifier,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub metadata: Option<serde_json::Value>,
}

impl ClassifierArtifact {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("classifier file is not JSON: {e}")))?;
        let parsed = if value.get("classifier").is_some() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|classifier| Self {
                classifier,
                normalization: None,
                metadata: None,
            })
        };
        parsed.map_err(|e| Error::Invalid(format!("invalid classifier: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub metrics: MetricsReport,
    pub bounds: BoundsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    pub entries: Vec<AuditEntry>,
}

fn bounds_for(
    data: &Dataset,
    classifier: &Classifier,
    cost: &AuditCost,
    psi: SubPopCondition,
) -> Result<(CostModel, BoundsReport)> {
    match (classifier, cost) {
        (Classifier::Threshold(t), AuditCost::Linear1d { .. } | AuditCost::Quadratic1d) => {
            let model = match *cost {
                AuditCost::Linear1d { a0, a1 } => CostModel1D::scaled_linear(a0, a1)?,
                _ => CostModel1D::quadratic_separable(),
            };
            let (lo, hi) = data
                .samples()
                .iter()
                .map(|s| s.features[0])
                .chain([t.tau0, t.tau1])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x), b.max(x))
                });
            let mut b = burden_gap_bounds_1d(data, t, psi, &model, FeatureRange::new(lo, hi)?)?;
            b.constraint_lhs = Some(constraint_lhs_1d(data, t.tau0, t.tau1, psi)?);
            Ok((CostModel::OneD(model), b))
        }
        (
            Classifier::Linear(l),
            AuditCost::Linear {
                costs,
                group0_multiplier,
            },
        ) => {
            let fc = FeatureCosts {
                costs: costs.clone(),
                group0_multiplier: *group0_multiplier,
            };
            let c = fc.resolve(data.schema())?;
            let b = burden_gap_exact_linear(data, l, psi, &c)?.into();
            Ok((CostModel::Linear(c), b))
        }
        (Classifier::Linear(l), AuditCost::Quadratic { .. }) => {
            let q = cost.quadratic()?.expect("matched the quadratic variant");
            let qb = burden_gap_upper_quadratic(data, l, psi, &q)?;
            let b = BoundsReport {
                lower: f64::NEG_INFINITY,
                upper: qb.upper,
                degenerate: qb.degenerate,
                ..Default::default()
            };
            Ok((CostModel::Quadratic(q), b))
        }
        (Classifier::Threshold(_), _) => Err(Error::Schema(
            "threshold classifiers need a one-dimensional cost (linear1d or quadratic1d)".into(),
        )),
        (Classifier::Linear(_), _) => Err(Error::Schema(
            "linear classifiers need a multi-feature cost (linear or quadratic)".into(),
        )),
    }
}

/// Computes metrics and bounds for every requested ψ and writes `audit.json`
/// and `audit.csv`.
pub fn run_audit(cfg: &AuditConfig, out: &Path) -> Result<AuditReport> {
    let prov = Provenance::new(cfg)?;
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Invalid("audit needs a dataset (--data)".into()))?;
    let clf_path = cfg
        .classifier
        .as_ref()
        .ok_or_else(|| Error::Invalid("audit needs a classifier (--classifier)".into()))?;
    let artifact = ClassifierArtifact::from_json(&std::fs::read_to_string(clf_path)?)?;
    let mut data = load_csv_dataset(data_path, None)?;
    if let Some(norm) = &artifact.normalization {
        if norm.mean.len() != data.dim() {
            return Err(Error::Schema(format!(
                "classifier normalization covers {} features, data has {}",
                norm.mean.len(),
                data.dim()
            )));
        }
        data = apply_normalization(&data, norm)?;
    }
    artifact.classifier.check_dim(data.dim())?;

    let mut entries = Vec::new();
    for psi in cfg.psi.conditions() {
        let (model, bounds) = bounds_for(&data, &artifact.classifier, &cfg.cost, psi)?;
        let metrics = metrics_report(
            &data,
            &artifact.classifier,
            &model,
            psi,
            ResponseSemantics::BoundaryCost,
        )?;
        entries.push(AuditEntry { metrics, bounds });
    }
    let report = AuditReport {
        provenance: prov.clone(),
        entries,
    };

    ensure_dir(out)?;
    prov.write_json(&out.join("audit.json"), &report)?;
    prov.write_csv(
        &out.join("audit.csv"),
        &[
            "psi",
            "accuracy",
            "h",
            "g",
            "h0",
            "h1",
            "g0",
            "g1",
            "p0",
            "p1",
            "e0",
            "e1",
            "lower",
            "upper",
            "exact",
            "delta",
            "constraint_lhs",
        ],
        report.entries.iter().map(|e| {
            let m = &e.metrics;
            let b = &e.bounds;
            vec![
                m.psi.short_name().to_string(),
                num(m.accuracy),
                num(m.h_gap),
                num(m.g_gap),
                num(m.h0),
                num(m.h1),
                num(m.g0),
                num(m.g1),
                num(m.p0),
                num(m.p1),
                num(m.e0),
                num(m.e1),
                num(b.lower),
                num(b.upper),
                opt(b.exact),
                opt(b.delta),
                opt(b.constraint_lhs),
            ]
        }),
    )?;
    Ok(report)
}
