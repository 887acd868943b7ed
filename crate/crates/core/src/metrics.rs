//! Empirical selection rates, social burden, and the auxiliary quantities P_z
//! and E_z that appear in the burden-gap bounds.
//!
//! Every per-group quantity is computed over the ψ-qualifying members of the
//! group sorted by score, summing in ascending-score order with compensated
//! summation. The threshold sweep relies on this canonical order to reproduce
//! a fresh evaluation bit for bit.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::domain::{Classifier, CostModel, Dataset, Group, Sample, SubPopCondition};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::response::{response_cost, ResponseSemantics};

/// ψ-qualifying members of one group, sorted ascending by classifier score.
#[derive(Debug, Clone)]
pub struct ScoredGroup<'a> {
    pub group: Group,
    /// (score, sample) pairs in ascending score order; ties keep dataset order.
    pub members: Vec<(f64, &'a Sample)>,
}

impl<'a> ScoredGroup<'a> {
    pub fn new<F>(dataset: &'a Dataset, psi: SubPopCondition, group: Group, score: F) -> Self
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut members: Vec<(f64, &Sample)> = dataset
            .samples()
            .iter()
            .filter(|s| s.group == group && psi.holds(s))
            .map(|s| (score(&s.features), s))
            .collect();
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { group, members }
    }

    pub fn for_classifier(
        dataset: &'a Dataset,
        classifier: &Classifier,
        psi: SubPopCondition,
        group: Group,
    ) -> Result<Self> {
        classifier.check_dim(dataset.dim())?;
        Ok(Self::new(dataset, psi, group, |x| classifier.score(x)))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of members strictly below `boundary`, i.e. negatively classified.
    pub fn negatives_below(&self, boundary: f64) -> usize {
        self.members
            .partition_point(|(s, _)| s.total_cmp(&boundary) == Ordering::Less)
    }

    pub fn require_nonempty(&self, what: &str) -> Result<usize> {
        if self.members.is_empty() {
            return Err(Error::UndefinedMetric(format!(
                "{what}: no ψ-qualifying samples in group {}",
                self.group.index()
            )));
        }
        Ok(self.members.len())
    }

    /// Σ score over the first `k` members, ascending.
    pub fn score_sum(&self, k: usize) -> f64 {
        let mut acc = CompensatedSum::new();
        for (s, _) in &self.members[..k] {
            acc.add(*s);
        }
        acc.value()
    }

    /// Σ cost over the first `k` members, ascending.
    pub fn cost_sum(
        &self,
        k: usize,
        classifier: &Classifier,
        cost: &CostModel,
        semantics: ResponseSemantics,
    ) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (_, sample) in &self.members[..k] {
            acc.add(response_cost(classifier, cost, sample, semantics)?);
        }
        Ok(acc.value())
    }
}

/// H_z(f, ψ): share of ψ-qualifying group-z samples classified positive.
pub fn selection_rate(
    dataset: &Dataset,
    classifier: &Classifier,
    psi: SubPopCondition,
    group: Group,
) -> Result<f64> {
    let view = ScoredGroup::for_classifier(dataset, classifier, psi, group)?;
    let n = view.require_nonempty("selection rate")?;
    let neg = view.negatives_below(classifier.boundary(group));
    Ok(rate(n - neg, n))
}

/// H(f, ψ) = H_0 − H_1.
pub fn selection_rate_gap(
    dataset: &Dataset,
    classifier: &Classifier,
    psi: SubPopCondition,
) -> Result<f64> {
    Ok(selection_rate(dataset, classifier, psi, Group::Zero)?
        - selection_rate(dataset, classifier, psi, Group::One)?)
}

/// G_z(f, ψ): mean manipulation cost over ψ-qualifying group-z samples.
pub fn social_burden(
    dataset: &Dataset,
    classifier: &Classifier,
    cost: &CostModel,
    psi: SubPopCondition,
    group: Group,
    semantics: ResponseSemantics,
) -> Result<f64> {
    let view = ScoredGroup::for_classifier(dataset, classifier, psi, group)?;
    let n = view.require_nonempty("social burden")?;
    let neg = view.negatives_below(classifier.boundary(group));
    Ok(view.cost_sum(neg, classifier, cost, semantics)? / n as f64)
}

/// G(f, ψ) = G_0 − G_1.
pub fn social_burden_gap(
    dataset: &Dataset,
    classifier: &Classifier,
    cost: &CostModel,
    psi: SubPopCondition,
    semantics: ResponseSemantics,
) -> Result<f64> {
    Ok(
        social_burden(dataset, classifier, cost, psi, Group::Zero, semantics)?
            - social_burden(dataset, classifier, cost, psi, Group::One, semantics)?,
    )
}

/// `(P_z, E_z)`: share of ψ-qualifying group-z samples classified negative, and the
/// mean score of those negatives times P_z.
pub fn empirical_p_e(
    dataset: &Dataset,
    classifier: &Classifier,
    psi: SubPopCondition,
    group: Group,
) -> Result<(f64, f64)> {
    let view = ScoredGroup::for_classifier(dataset, classifier, psi, group)?;
    p_e_from_view(&view, classifier.boundary(group))
}

pub(crate) fn p_e_from_view(view: &ScoredGroup<'_>, boundary: f64) -> Result<(f64, f64)> {
    let n = view.require_nonempty("P/E")?;
    let neg = view.negatives_below(boundary);
    Ok(p_e_from_counts(n, neg, view.score_sum(neg)))
}

/// P = 1 − H (so the identity holds bit for bit) and E = (Σ negative scores)/n,
/// which is mean-of-negatives × P.
pub(crate) fn p_e_from_counts(n: usize, neg: usize, negative_score_sum: f64) -> (f64, f64) {
    if neg == 0 {
        return (0.0, 0.0);
    }
    (1.0 - rate(n - neg, n), negative_score_sum / n as f64)
}

#[inline]
pub(crate) fn rate(count: usize, n: usize) -> f64 {
    count as f64 / n as f64
}

/// Share of all samples with f(x) = y.
pub fn accuracy(dataset: &Dataset, classifier: &Classifier) -> Result<f64> {
    classifier.check_dim(dataset.dim())?;
    if dataset.is_empty() {
        return Err(Error::UndefinedMetric(
            "accuracy of an empty dataset".into(),
        ));
    }
    let correct = dataset
        .samples()
        .iter()
        .filter(|s| classifier.decide(&s.features, s.group) == s.label)
        .count();
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psi: SubPopCondition,
    pub accuracy: f64,
    pub h0: f64,
    pub h1: f64,
    pub h_gap: f64,
    pub g0: f64,
    pub g1: f64,
    pub g_gap: f64,
    pub p0: f64,
    pub p1: f64,
    pub e0: f64,
    pub e1: f64,
    /// ψ-qualifying samples per group.
    pub n0: usize,
    pub n1: usize,
    /// Negatively classified ψ-qualifying samples per group.
    pub neg0: usize,
    pub neg1: usize,
}

/// All metrics for one ψ, visiting each group once.
pub fn metrics_report(
    dataset: &Dataset,
    classifier: &Classifier,
    cost: &CostModel,
    psi: SubPopCondition,
    semantics: ResponseSemantics,
) -> Result<MetricsReport> {
    let accuracy = accuracy(dataset, classifier)?;
    let mut per_group = [(0.0, 0.0, 0.0, 0.0, 0usize, 0usize); 2];
    for g in Group::BOTH {
        let view = ScoredGroup::for_classifier(dataset, classifier, psi, g)?;
        let n = view.require_nonempty("metrics report")?;
        let boundary = classifier.boundary(g);
        let neg = view.negatives_below(boundary);
        let h = rate(n - neg, n);
        let burden = view.cost_sum(neg, classifier, cost, semantics)? / n as f64;
        let (p, e) = p_e_from_view(&view, boundary)?;
        per_group[g.index()] = (h, burden, p, e, n, neg);
    }
    let [(h0, g0, p0, e0, n0, neg0), (h1, g1, p1, e1, n1, neg1)] = per_group;
    Ok(MetricsReport {
        psi,
        accuracy,
        h0,
        h1,
        h_gap: h0 - h1,
        g0,
        g1,
        g_gap: g0 - g1,
        p0,
        p1,
        e0,
        e1,
        n0,
        n1,
        neg0,
        neg1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBiasReport {
    pub biased_against_0: bool,
    /// max of F̂_1(x) − F̂_0(x) over the checked points; negative when biased.
    pub max_violation: f64,
    pub points_checked: usize,
}

/// Strict first-order dominance test of group 0's empirical CDF over group 1's,
/// on a one-feature dataset.
pub fn feature_bias_check(dataset: &Dataset, psi: SubPopCondition) -> Result<FeatureBiasReport> {
    if dataset.dim() != 1 {
        return Err(Error::Schema(format!(
            "feature bias on raw features needs one feature, data has {}; use the projected variant",
            dataset.dim()
        )));
    }
    bias_from_scores(dataset, psi, |x| x[0])
}

/// Feature-bias test on the projected score uᵀx of a linear classifier.
pub fn feature_bias_check_projected(
    dataset: &Dataset,
    classifier: &Classifier,
    psi: SubPopCondition,
) -> Result<FeatureBiasReport> {
    classifier.check_dim(dataset.dim())?;
    bias_from_scores(dataset, psi, |x| classifier.score(x))
}

/// The empirical CDFs F̂_z(x) = P̂[X ≤ x] are compared at every distinct pooled value.
/// A point where both CDFs are 0 or both are 1 carries no information and is skipped;
/// everywhere else F̂_0 must strictly exceed F̂_1. At least one point must be checked.
fn bias_from_scores<F: Fn(&[f64]) -> f64>(
    dataset: &Dataset,
    psi: SubPopCondition,
    score: F,
) -> Result<FeatureBiasReport> {
    let g0 = ScoredGroup::new(dataset, psi, Group::Zero, &score);
    let g1 = ScoredGroup::new(dataset, psi, Group::One, &score);
    g0.require_nonempty("feature bias")?;
    g1.require_nonempty("feature bias")?;
    let s0: Vec<f64> = g0.members.iter().map(|m| m.0).collect();
    let s1: Vec<f64> = g1.members.iter().map(|m| m.0).collect();
    let mut pooled: Vec<f64> = s0.iter().chain(&s1).copied().collect();
    pooled.sort_by(|a, b| a.total_cmp(b));
    pooled.dedup();

    let cdf = |s: &[f64], x: f64| s.partition_point(|v| *v <= x) as f64 / s.len() as f64;
    let mut max_violation = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for &x in &pooled {
        let f0 = cdf(&s0, x);
        let f1 = cdf(&s1, x);
        let uninformative = (f0 == 0.0 && f1 == 0.0) || (f0 == 1.0 && f1 == 1.0);
        if uninformative {
            continue;
        }
        checked += 1;
        max_violation = max_violation.max(f1 - f0);
    }
    Ok(FeatureBiasReport {
        biased_against_0: checked > 0 && max_violation < 0.0,
        max_violation: if checked > 0 { max_violation } else { 0.0 },
        points_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CostModel1D, ThresholdClassifier};
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::from_scalar(&[(1.0, 0, 0), (3.0, 1, 0), (2.0, 0, 1), (4.0, 1, 1)]).unwrap()
    }

    fn thr(t0: f64, t1: f64) -> Classifier {
        Classifier::Threshold(ThresholdClassifier::new(t0, t1))
    }

    fn linear_cost() -> CostModel {
        CostModel::OneD(CostModel1D::linear())
    }

    const ALL: SubPopCondition = SubPopCondition::All;
    const BC: ResponseSemantics = ResponseSemantics::BoundaryCost;

    #[test]
    fn selection_rate_examples() {
        let d = toy();
        assert_eq!(
            selection_rate(&d, &thr(3.0, 3.0), ALL, Group::Zero).unwrap(),
            0.5
        );
        assert_eq!(
            selection_rate(&d, &thr(0.0, 0.0), ALL, Group::Zero).unwrap(),
            1.0
        );
        assert_eq!(
            selection_rate(&d, &thr(10.0, 10.0), ALL, Group::One).unwrap(),
            0.0
        );
        assert_eq!(selection_rate_gap(&d, &thr(3.0, 3.0), ALL).unwrap(), 0.0);

        let d2 =
            Dataset::from_scalar(&[(1.0, 0, 0), (2.0, 0, 0), (3.0, 0, 1), (4.0, 0, 1)]).unwrap();
        assert_eq!(selection_rate_gap(&d2, &thr(3.0, 3.0), ALL).unwrap(), -1.0);
    }

    #[test]
    fn empty_conditioning_set_is_an_error() {
        let d = Dataset::from_scalar(&[(1.0, 0, 0), (2.0, 0, 1)]).unwrap();
        let err = selection_rate(
            &d,
            &thr(1.0, 1.0),
            SubPopCondition::PositiveLabel,
            Group::Zero,
        );
        assert!(matches!(err, Err(Error::UndefinedMetric(_))));
        let err = social_burden(
            &d,
            &thr(1.0, 1.0),
            &linear_cost(),
            SubPopCondition::PositiveLabel,
            Group::One,
            BC,
        );
        assert!(matches!(err, Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn social_burden_examples() {
        let d = toy();
        let f = thr(3.0, 3.0);
        let c = linear_cost();
        assert_eq!(
            social_burden(&d, &f, &c, ALL, Group::Zero, BC).unwrap(),
            1.0
        );
        assert_eq!(social_burden(&d, &f, &c, ALL, Group::One, BC).unwrap(), 0.5);
        assert_eq!(social_burden_gap(&d, &f, &c, ALL, BC).unwrap(), 0.5);
        assert_eq!(
            social_burden_gap(&d, &thr(0.0, 0.0), &c, ALL, BC).unwrap(),
            0.0
        );
    }

    #[test]
    fn p_e_examples() {
        let d = toy();
        let f = thr(3.0, 3.0);
        assert_eq!(empirical_p_e(&d, &f, ALL, Group::Zero).unwrap(), (0.5, 0.5));
        assert_eq!(empirical_p_e(&d, &f, ALL, Group::One).unwrap(), (0.5, 1.0));
        assert_eq!(
            empirical_p_e(&d, &thr(0.5, 0.5), ALL, Group::One).unwrap(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn accuracy_examples() {
        let d = toy();
        // positives are exactly the y = 1 samples
        assert_eq!(accuracy(&d, &thr(3.0, 4.0)).unwrap(), 1.0);
        let flipped =
            Dataset::from_scalar(&[(1.0, 1, 0), (3.0, 0, 0), (2.0, 1, 1), (4.0, 0, 1)]).unwrap();
        assert_eq!(accuracy(&flipped, &thr(3.0, 4.0)).unwrap(), 0.0);
    }

    #[test]
    fn bias_examples() {
        let d = Dataset::from_scalar(&[
            (1.0, 0, 0),
            (2.0, 0, 0),
            (3.0, 0, 0),
            (2.0, 0, 1),
            (3.0, 0, 1),
            (4.0, 0, 1),
        ])
        .unwrap();
        let r = feature_bias_check(&d, ALL).unwrap();
        assert!(r.biased_against_0);
        assert!(r.max_violation < 0.0);

        let same =
            Dataset::from_scalar(&[(1.0, 0, 0), (2.0, 0, 0), (1.0, 0, 1), (2.0, 0, 1)]).unwrap();
        assert!(!feature_bias_check(&same, ALL).unwrap().biased_against_0);

        let reversed = Dataset::from_scalar(&[(4.0, 0, 0), (1.0, 0, 1)]).unwrap();
        let r = feature_bias_check(&reversed, ALL).unwrap();
        assert!(!r.biased_against_0);
        assert!(r.max_violation > 0.0);

        let single = Dataset::from_scalar(&[(5.0, 0, 0), (5.0, 0, 1)]).unwrap();
        assert!(!feature_bias_check(&single, ALL).unwrap().biased_against_0);
    }

    #[test]
    fn bias_requires_both_groups() {
        let d = Dataset::from_scalar(&[(1.0, 0, 0)]).unwrap();
        assert!(matches!(
            feature_bias_check(&d, ALL),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn report_is_consistent_with_single_metrics() {
        let d = toy();
        let f = thr(3.0, 3.0);
        let r = metrics_report(&d, &f, &linear_cost(), ALL, BC).unwrap();
        assert_eq!(r.h_gap, 0.0);
        assert_eq!(r.g_gap, 0.5);
        assert_eq!((r.p0, r.e0, r.p1, r.e1), (0.5, 0.5, 0.5, 1.0));
        assert_eq!((r.n0, r.n1, r.neg0, r.neg1), (2, 2, 1, 1));
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        prop::collection::vec((0.0f64..100.0, 0u8..2, 0u8..2), 4..60).prop_filter_map(
            "both groups",
            |rows| {
                let has = |z| rows.iter().any(|r| r.2 == z);
                if has(0) && has(1) {
                    Dataset::from_scalar(&rows).ok()
                } else {
                    None
                }
            },
        )
    }

    proptest! {
        #[test]
        fn burden_nonnegative_and_p_is_one_minus_h(d in dataset_strategy(), t0 in 0.0f64..100.0, t1 in 0.0f64..100.0) {
            let f = thr(t0, t1);
            let q = CostModel::OneD(CostModel1D::quadratic_separable());
            for g in Group::BOTH {
                prop_assert!(social_burden(&d, &f, &q, ALL, g, BC).unwrap() >= 0.0);
                let h = selection_rate(&d, &f, ALL, g).unwrap();
                let (p, _) = empirical_p_e(&d, &f, ALL, g).unwrap();
                prop_assert_eq!(p, 1.0 - h);
            }
        }

        #[test]
        fn scaling_linear_cost_scales_burden(d in dataset_strategy(), t0 in 0.0f64..100.0, t1 in 0.0f64..100.0, a in 0.25f64..8.0) {
            let f = thr(t0, t1);
            let base = social_burden_gap(&d, &f, &linear_cost(), ALL, BC).unwrap();
            let h_base = selection_rate_gap(&d, &f, ALL).unwrap();
            let scaled_cost = CostModel::OneD(CostModel1D::scaled_linear(a, a).unwrap());
            let scaled = social_burden_gap(&d, &f, &scaled_cost, ALL, BC).unwrap();
            prop_assert!((scaled - a * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
            prop_assert_eq!(h_base, selection_rate_gap(&d, &f, ALL).unwrap());
        }

        #[test]
        fn metrics_ignore_sample_order(d in dataset_strategy(), t in 0.0f64..100.0, rot in 0usize..60) {
            let f = thr(t, t + 5.0);
            let (schema, mut samples) = d.clone().into_parts();
            let k = rot % samples.len();
            samples.rotate_left(k);
            let rotated = Dataset::new(schema, samples).unwrap();
            let a = metrics_report(&d, &f, &linear_cost(), ALL, BC).unwrap();
            let b = metrics_report(&rotated, &f, &linear_cost(), ALL, BC).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
