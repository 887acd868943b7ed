//! Closed-form relations between the selection-rate gap H and the social burden
//! gap G: two-sided bounds for threshold classifiers, the exact identity for
//! linear classifiers under linear costs, and an upper bound under quadratic costs.

use serde::{Deserialize, Serialize};

use crate::domain::{
    Classifier, CostModel1D, Dataset, Group, LinearClassifier, LinearCostMultiD,
    QuadraticCostMultiD, SubPopCondition, ThresholdClassifier,
};
use crate::error::{Error, Result};
use crate::metrics::{p_e_from_view, rate, ScoredGroup};
use crate::numeric::dot;
use crate::response::{best_efficiency, gradient_bounds_1d, FeatureRange, GradientBounds};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
    pub delta: Option<f64>,
    pub w0_star: Option<f64>,
    pub w1_star: Option<f64>,
    pub constraint_lhs: Option<f64>,
    /// The quadratic bound had no negatively classified group-0 sample to work with.
    pub degenerate: bool,
}

/// Empirical inputs shared by every bound: H and (P_z, E_z) for both groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapInputs {
    pub h: f64,
    pub p0: f64,
    pub p1: f64,
    pub e0: f64,
    pub e1: f64,
}

impl GapInputs {
    pub fn compute(
        dataset: &Dataset,
        classifier: &Classifier,
        psi: SubPopCondition,
    ) -> Result<Self> {
        let mut h = [0.0; 2];
        let mut pe = [(0.0, 0.0); 2];
        for g in Group::BOTH {
            let view = ScoredGroup::for_classifier(dataset, classifier, psi, g)?;
            let n = view.require_nonempty("burden gap bound")?;
            let boundary = classifier.boundary(g);
            h[g.index()] = rate(n - view.negatives_below(boundary), n);
            pe[g.index()] = p_e_from_view(&view, boundary)?;
        }
        Ok(Self {
            h: h[0] - h[1],
            p0: pe[0].0,
            p1: pe[1].0,
            e0: pe[0].1,
            e1: pe[1].1,
        })
    }
}

/// Lower and upper bounds on G for thresholds `(tau0, tau1)` given per-group
/// gradient bounds of the cost.
pub fn bounds_from_inputs(
    inputs: &GapInputs,
    tau0: f64,
    tau1: f64,
    grads: &[GradientBounds; 2],
) -> (f64, f64) {
    let GapInputs { h, p0, e0, e1, .. } = *inputs;
    let [g0, g1] = grads;
    let upper = g1.upper * tau1 * h + (g1.upper * tau1 - g0.lower * tau0) * p0 - g1.upper * e1
        + g0.lower * e0;
    let lower = g1.lower * tau1 * h + (g1.lower * tau1 - g0.upper * tau0) * p0 - g1.lower * e1
        + g0.upper * e0;
    (lower, upper)
}

/// Two-sided bounds on G for a threshold classifier under a one-dimensional cost
/// whose gradient bounds are taken over `range`.
pub fn burden_gap_bounds_1d(
    dataset: &Dataset,
    classifier: &ThresholdClassifier,
    psi: SubPopCondition,
    cost: &CostModel1D,
    range: FeatureRange,
) -> Result<BoundsReport> {
    let grads = gradient_bounds_1d(cost, range)?;
    let inputs = GapInputs::compute(dataset, &Classifier::Threshold(*classifier), psi)?;
    let (lower, upper) = bounds_from_inputs(&inputs, classifier.tau0, classifier.tau1, &grads);
    Ok(BoundsReport {
        lower,
        upper,
        ..Default::default()
    })
}

/// Left-hand side of the burden-gap constraint for the unit linear cost:
/// −τ1·H − (τ1 − τ0)·P_0 + E_1 − E_0, the upper bound with g_l = g_u = −1.
/// A classifier is feasible for target g iff this is ≤ g.
pub fn constraint_lhs_1d(
    dataset: &Dataset,
    tau0: f64,
    tau1: f64,
    psi: SubPopCondition,
) -> Result<f64> {
    let f = Classifier::Threshold(ThresholdClassifier::new(tau0, tau1));
    let inputs = GapInputs::compute(dataset, &f, psi)?;
    Ok(constraint_lhs_from_inputs(&inputs, tau0, tau1))
}

pub fn constraint_lhs_from_inputs(inputs: &GapInputs, tau0: f64, tau1: f64) -> f64 {
    let unit = GradientBounds {
        lower: -1.0,
        upper: -1.0,
    };
    bounds_from_inputs(inputs, tau0, tau1, &[unit, unit]).1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearIdentity {
    pub exact: f64,
    pub delta: f64,
    pub w0_star: f64,
    pub w1_star: f64,
}

impl From<LinearIdentity> for BoundsReport {
    fn from(l: LinearIdentity) -> Self {
        BoundsReport {
            lower: l.exact,
            upper: l.exact,
            exact: Some(l.exact),
            delta: Some(l.delta),
            w0_star: Some(l.w0_star),
            w1_star: Some(l.w1_star),
            ..Default::default()
        }
    }
}

/// G = −(v1·H)/w1⋆ − δ with δ = (v1/w1⋆ − v0/w0⋆)P_0 − E_1/w1⋆ + E_0/w0⋆,
/// where w_z⋆ = max_i u_i/d_{z,i} and E_z uses the score uᵀx.
pub fn burden_gap_exact_linear(
    dataset: &Dataset,
    classifier: &LinearClassifier,
    psi: SubPopCondition,
    cost: &LinearCostMultiD,
) -> Result<LinearIdentity> {
    if cost.dim() != classifier.u.len() {
        return Err(Error::Schema(
            "cost and classifier dimensions differ".into(),
        ));
    }
    let (w0, _) = best_efficiency(&classifier.u, cost.vector(Group::Zero))?;
    let (w1, _) = best_efficiency(&classifier.u, cost.vector(Group::One))?;
    let inputs = GapInputs::compute(dataset, &Classifier::Linear(classifier.clone()), psi)?;
    Ok(linear_identity_from_inputs(
        &inputs,
        classifier.v0,
        classifier.v1,
        w0,
        w1,
    ))
}

pub fn linear_identity_from_inputs(
    inputs: &GapInputs,
    v0: f64,
    v1: f64,
    w0: f64,
    w1: f64,
) -> LinearIdentity {
    let delta = (v1 / w1 - v0 / w0) * inputs.p0 - inputs.e1 / w1 + inputs.e0 / w0;
    LinearIdentity {
        exact: -(v1 * inputs.h) / w1 - delta,
        delta,
        w0_star: w0,
        w1_star: w1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBound {
    pub upper: f64,
    /// Largest v_0 − uᵀx over negatively classified group-0 samples.
    pub max_shortfall: f64,
    /// No negatively classified group-0 sample: the bound is 0 and G = −G_1 ≤ 0.
    pub degenerate: bool,
}

/// G ≤ −(2M/(uᵀB⁻¹u))·(v_0·H − v_0·P_1 + E_0), M the largest group-0 shortfall
/// v_0 − uᵀx among negatively classified ψ-samples.
pub fn burden_gap_upper_quadratic(
    dataset: &Dataset,
    classifier: &LinearClassifier,
    psi: SubPopCondition,
    cost: &QuadraticCostMultiD,
) -> Result<QuadraticBound> {
    let f = Classifier::Linear(classifier.clone());
    let inputs = GapInputs::compute(dataset, &f, psi)?;
    let view = ScoredGroup::for_classifier(dataset, &f, psi, Group::Zero)?;
    let neg = view.negatives_below(classifier.v0);
    if neg == 0 {
        return Ok(QuadraticBound {
            upper: 0.0,
            max_shortfall: 0.0,
            degenerate: true,
        });
    }
    // members are sorted ascending, so the lowest score has the largest shortfall
    let max_shortfall = classifier.v0 - view.members[0].0;
    let binv_u = cost.solve(&classifier.u)?;
    let k = dot(&classifier.u, binv_u.as_slice());
    if !(k > 0.0) {
        return Err(Error::Numerical("uᵀB⁻¹u is not positive".into()));
    }
    let v0 = classifier.v0;
    let upper = -(2.0 * max_shortfall / k) * (v0 * inputs.h - v0 * inputs.p1 + inputs.e0);
    Ok(QuadraticBound {
        upper,
        max_shortfall,
        degenerate: false,
    })
}
