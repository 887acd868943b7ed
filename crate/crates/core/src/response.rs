//! Strategic best responses and the cost they incur.

use serde::{Deserialize, Serialize};

use crate::domain::{
    Classifier, Cost1D, CostModel, CostModel1D, Group, LinearClassifier, LinearCostMultiD,
    QuadraticCostMultiD, Sample, ThresholdClassifier,
};
use crate::error::{Error, Result};
use crate::numeric::dot;

/// How a negatively classified individual is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSemantics {
    /// Every negatively classified individual pays the minimum cost of reaching the boundary.
    #[default]
    BoundaryCost,
    /// Manipulate only when the unit gain covers the cost, i.e. boundary cost ≤ 1.
    Rational,
}

impl ResponseSemantics {
    /// Whether an individual facing `boundary_cost` actually moves.
    #[inline]
    pub fn moves(self, boundary_cost: f64) -> bool {
        match self {
            ResponseSemantics::BoundaryCost => true,
            ResponseSemantics::Rational => boundary_cost <= 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub position: Vec<f64>,
    pub cost: f64,
    /// Quadratic costs only: the unconstrained optimum decreases some feature.
    pub decreases_feature: bool,
}

impl Response {
    fn stay(x: &[f64]) -> Self {
        Self {
            position: x.to_vec(),
            cost: 0.0,
            decreases_feature: false,
        }
    }
}

/// One-dimensional best response: `(x', cost_paid)`.
pub fn best_response_1d(
    x: f64,
    classifier: &ThresholdClassifier,
    group: Group,
    cost: &CostModel1D,
    semantics: ResponseSemantics,
) -> (f64, f64) {
    let tau = classifier.threshold(group);
    if x >= tau {
        return (x, 0.0);
    }
    let c = cost.d(group, x, tau);
    if semantics.moves(c) {
        (tau, c)
    } else {
        (x, 0.0)
    }
}

/// `w⋆ = max_i u_i / d_i` over finite-cost features with its lowest-index maximizer.
///
/// Features with u_i ≤ 0 never help and cannot attain a positive maximum.
pub fn best_efficiency(u: &[f64], d: &[f64]) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (&ui, &di)) in u.iter().zip(d).enumerate() {
        if !di.is_finite() {
            continue;
        }
        let ratio = ui / di;
        if best.is_none_or(|(w, _)| ratio > w) {
            best = Some((ratio, i));
        }
    }
    match best {
        Some((w, i)) if w > 0.0 => Ok((w, i)),
        Some(_) => Err(Error::InfeasibleManipulation(
            "no finite-cost feature has a positive weight".into(),
        )),
        None => Err(Error::InfeasibleManipulation(
            "every feature is non-manipulable".into(),
        )),
    }
}

/// Cheapest move onto the boundary uᵀx' = v_z under a linear cost.
///
/// All movement goes to the lowest-index feature attaining w⋆; the paid cost is
/// (v_z − uᵀx)/w⋆.
pub fn best_response_linear(
    x: &[f64],
    classifier: &LinearClassifier,
    group: Group,
    cost: &LinearCostMultiD,
) -> Result<(Vec<f64>, f64)> {
    check_len(x.len(), classifier.u.len(), cost.dim())?;
    let v = classifier.offset(group);
    let s = classifier.score(x);
    if s >= v {
        return Ok((x.to_vec(), 0.0));
    }
    let (w, i) = best_efficiency(&classifier.u, cost.vector(group))?;
    let paid = (v - s) / w;
    let mut moved = x.to_vec();
    moved[i] += (v - s) / classifier.u[i];
    // rounding can leave the move an ulp short of the boundary
    for _ in 0..64 {
        if classifier.decide(&moved, group) {
            break;
        }
        moved[i] = moved[i].next_up();
    }
    Ok((moved, paid))
}

/// Minimum of (x' − x)ᵀB(x' − x) over the boundary uᵀx' = v_z.
///
/// The componentwise constraint x' ≥ x is not enforced; the result flags when the
/// optimum lowers some feature.
pub fn best_response_quadratic(
    x: &[f64],
    classifier: &LinearClassifier,
    group: Group,
    cost: &QuadraticCostMultiD,
) -> Result<Response> {
    check_len(x.len(), classifier.u.len(), cost.dim())?;
    let v = classifier.offset(group);
    let s = classifier.score(x);
    if s >= v {
        return Ok(Response::stay(x));
    }
    let binv_u = cost.solve(&classifier.u)?;
    let k = dot(&classifier.u, binv_u.as_slice());
    if !(k > 0.0) {
        return Err(Error::Numerical("uᵀB⁻¹u is not positive".into()));
    }
    // x' = x + (λ/2)B⁻¹u with λ = 2(v − s)/k
    let mut step = (v - s) / k;
    let mut moved: Vec<f64> = x
        .iter()
        .zip(binv_u.iter())
        .map(|(a, b)| a + step * b)
        .collect();
    for _ in 0..64 {
        if classifier.decide(&moved, group) {
            break;
        }
        step = step.next_up();
        moved = x
            .iter()
            .zip(binv_u.iter())
            .map(|(a, b)| a + step * b)
            .collect();
    }
    Ok(Response {
        position: moved,
        cost: (v - s) * (v - s) / k,
        decreases_feature: binv_u.iter().any(|b| *b < 0.0),
    })
}

fn check_len(x: usize, u: usize, cost: usize) -> Result<()> {
    if x != u || u != cost {
        return Err(Error::Schema(format!(
            "dimension mismatch: features {x}, weights {u}, cost {cost}"
        )));
    }
    Ok(())
}

/// Best response of `sample` for any compatible classifier/cost pairing.
pub fn respond(
    classifier: &Classifier,
    cost: &CostModel,
    sample: &Sample,
    semantics: ResponseSemantics,
) -> Result<Response> {
    classifier.check_dim(sample.features.len())?;
    let x = &sample.features;
    let g = sample.group;
    let boundary = match (classifier, cost) {
        (Classifier::Threshold(t), CostModel::OneD(c)) => {
            let (pos, paid) = best_response_1d(x[0], t, g, c, ResponseSemantics::BoundaryCost);
            Response {
                position: vec![pos],
                cost: paid,
                decreases_feature: false,
            }
        }
        (Classifier::Linear(l), CostModel::Linear(c)) => {
            let (position, paid) = best_response_linear(x, l, g, c)?;
            Response {
                position,
                cost: paid,
                decreases_feature: false,
            }
        }
        (Classifier::Linear(l), CostModel::Quadratic(c)) => best_response_quadratic(x, l, g, c)?,
        _ => {
            return Err(Error::Schema(
                "cost model is not compatible with the classifier kind".into(),
            ))
        }
    };
    if boundary.cost > 0.0 && !semantics.moves(boundary.cost) {
        return Ok(Response::stay(x));
    }
    Ok(boundary)
}

/// Cost paid by `sample` under its best response.
#[inline]
pub fn response_cost(
    classifier: &Classifier,
    cost: &CostModel,
    sample: &Sample,
    semantics: ResponseSemantics,
) -> Result<f64> {
    // fast path for the 1-D case, which dominates threshold sweeps
    if let (Classifier::Threshold(t), CostModel::OneD(c)) = (classifier, cost) {
        classifier.check_dim(sample.features.len())?;
        return Ok(best_response_1d(sample.features[0], t, sample.group, c, semantics).1);
    }
    respond(classifier, cost, sample, semantics).map(|r| r.cost)
}

/// Closed interval of feature values over which gradient bounds are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub lo: f64,
    pub hi: f64,
}

impl FeatureRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Invalid(format!(
                "feature range [{lo}, {hi}] is empty or unbounded"
            )));
        }
        Ok(Self { lo, hi })
    }
}

/// Bounds `(g_l, g_u)` on ∂d/∂x1, with g_l ≤ g_u ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBounds {
    pub lower: f64,
    pub upper: f64,
}

pub const CUSTOM_GRID_POINTS: usize = 1000;
pub const CUSTOM_SAFETY_MARGIN: f64 = 0.05;

/// Per-group gradient bounds of d_z with respect to x1 over `range`.
pub fn gradient_bounds_1d(cost: &CostModel1D, range: FeatureRange) -> Result<[GradientBounds; 2]> {
    let g0 = group_gradient_bounds(cost.group(Group::Zero), range)?;
    let g1 = group_gradient_bounds(cost.group(Group::One), range)?;
    Ok([g0, g1])
}

fn group_gradient_bounds(cost: &Cost1D, range: FeatureRange) -> Result<GradientBounds> {
    match cost {
        Cost1D::Linear { scale } => Ok(GradientBounds {
            lower: -scale,
            upper: -scale,
        }),
        Cost1D::QuadraticSeparable { scale } => {
            if range.lo < 0.0 {
                return Err(Error::MonotonicityViolation(format!(
                    "x2² − x1² increases in x1 for x1 < 0 (range starts at {})",
                    range.lo
                )));
            }
            Ok(GradientBounds {
                lower: -2.0 * scale * range.hi,
                upper: -2.0 * scale * range.lo,
            })
        }
        Cost1D::Custom(f) => sampled_gradient_bounds(|a, b| (f.0)(a, b), range),
    }
}

/// Central differences on a grid of x1 values, for several x2 above each x1,
/// widened by the safety margin.
fn sampled_gradient_bounds<F: Fn(f64, f64) -> f64>(
    d: F,
    range: FeatureRange,
) -> Result<GradientBounds> {
    let width = range.hi - range.lo;
    if !(width > 0.0) {
        return Err(Error::Invalid(
            "sampling gradient bounds needs a non-degenerate range".into(),
        ));
    }
    let n = CUSTOM_GRID_POINTS;
    let grid: Vec<f64> = (0..n)
        .map(|i| range.lo + width * i as f64 / (n - 1) as f64)
        .collect();
    let h = width * 1e-6;
    let targets: Vec<f64> = grid
        .iter()
        .copied()
        .step_by(n / 20)
        .chain([range.hi])
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x2 in &targets {
        for &x1 in grid.iter().take_while(|&&x1| x1 < x2) {
            let g = (d(x1 + h, x2) - d(x1 - h, x2)) / (2.0 * h);
            if !g.is_finite() {
                return Err(Error::Numerical(format!(
                    "cost gradient not finite at ({x1}, {x2})"
                )));
            }
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    if !lo.is_finite() {
        return Err(Error::Invalid("no grid point pairs with x1 < x2".into()));
    }
    if hi > 1e-9 * (1.0 + lo.abs()) {
        return Err(Error::MonotonicityViolation(format!(
            "sampled gradient reaches {hi:.6e} > 0"
        )));
    }
    let hi = hi.min(0.0);
    Ok(GradientBounds {
        lower: lo * (1.0 + CUSTOM_SAFETY_MARGIN),
        upper: hi * (1.0 - CUSTOM_SAFETY_MARGIN),
    })
}
