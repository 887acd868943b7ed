//! Constrained logistic training of group-aware linear classifiers.

use serde::{Deserialize, Serialize};

use super::logloss::{log_loss_with_gradient, margin};
use super::sqp::{minimize, Problem, SolverConfig};
use crate::domain::{Dataset, Group, LinearClassifier, LinearCostMultiD, SubPopCondition};
use crate::error::{Error, Result};

/// Smallest best-efficiency ratio used when evaluating the burden-gap identity
/// during training, where the weights may momentarily favour no movable feature.
pub const MIN_EFFICIENCY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintKind {
    None,
    /// H(f, ψ) ≥ eps
    StatRateAtLeast {
        eps: f64,
    },
    /// G(f, ψ) ≤ g, with G from the linear-cost identity.
    BurdenGapAtMost {
        g: f64,
    },
    /// |G(f, ψ)| ≤ gamma
    AbsBurdenAtMost {
        gamma: f64,
    },
    /// |H(f, ψ)| ≤ eps
    AbsStatRateAtMost {
        eps: f64,
    },
}

impl ConstraintKind {
    pub fn needs_cost(&self) -> bool {
        matches!(
            self,
            ConstraintKind::BurdenGapAtMost { .. } | ConstraintKind::AbsBurdenAtMost { .. }
        )
    }

    fn values(&self, h: f64, g: f64) -> Vec<f64> {
        match *self {
            ConstraintKind::None => vec![],
            ConstraintKind::StatRateAtLeast { eps } => vec![h - eps],
            ConstraintKind::BurdenGapAtMost { g: target } => vec![target - g],
            ConstraintKind::AbsBurdenAtMost { gamma } => vec![gamma - g, gamma + g],
            ConstraintKind::AbsStatRateAtMost { eps } => vec![eps - h, eps + h],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub constraint: ConstraintKind,
    #[serde(default = "default_psi")]
    pub psi: SubPopCondition,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Recorded with the result. The solver itself starts from zero weights and
    /// uses no randomness.
    #[serde(default)]
    pub seed: u64,
}

fn default_psi() -> SubPopCondition {
    SubPopCondition::All
}

impl TrainConfig {
    pub fn new(constraint: ConstraintKind) -> Self {
        Self {
            constraint,
            psi: SubPopCondition::All,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub classifier: LinearClassifier,
    pub objective: f64,
    /// Constraint values c_j ≥ 0 at the returned weights.
    pub constraints: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// No iterate satisfied the constraint within `ftol`; the least-violating one is returned.
    pub infeasible: bool,
}

/// Selection-rate gap and identity-based burden gap on hard decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardGaps {
    pub h: f64,
    pub g: f64,
}

struct TrainProblem<'a> {
    dataset: &'a Dataset,
    kind: ConstraintKind,
    psi: SubPopCondition,
    cost: Option<&'a LinearCostMultiD>,
}

/// H and the linear-cost burden identity for `[u..., v0, v1]`, computed in one pass.
/// The best-efficiency ratio is floored at [`MIN_EFFICIENCY`]. Without a cost the
/// burden gap is reported as 0.
pub fn hard_gaps(
    params: &[f64],
    dataset: &Dataset,
    psi: SubPopCondition,
    cost: Option<&LinearCostMultiD>,
) -> Result<HardGaps> {
    let d = dataset.dim();
    let mut n = [0usize; 2];
    let mut neg = [0usize; 2];
    let mut neg_score = [0.0f64; 2];
    for s in dataset.samples().iter().filter(|s| psi.holds(s)) {
        let z = s.group.index();
        n[z] += 1;
        let m = margin(params, &s.features, s.group);
        if m < 0.0 {
            neg[z] += 1;
            neg_score[z] += m + params[d + z];
        }
    }
    if n.contains(&0) {
        return Err(Error::UndefinedMetric(
            "a group has no ψ-qualifying training samples".into(),
        ));
    }
    let frac = |k: usize, z: usize| k as f64 / n[z] as f64;
    let h = frac(n[0] - neg[0], 0) - frac(n[1] - neg[1], 1);
    let Some(cost) = cost else {
        return Ok(HardGaps { h, g: 0.0 });
    };
    let w = |g: Group| {
        cost.vector(g)
            .iter()
            .zip(&params[..d])
            .filter(|(c, _)| c.is_finite())
            .map(|(c, u)| u / c)
            .fold(MIN_EFFICIENCY, f64::max)
    };
    let (w0, w1) = (w(Group::Zero), w(Group::One));
    let (v0, v1) = (params[d], params[d + 1]);
    let (p0, e0, e1) = (
        frac(neg[0], 0),
        neg_score[0] / n[0] as f64,
        neg_score[1] / n[1] as f64,
    );
    let delta = (v1 / w1 - v0 / w0) * p0 - e1 / w1 + e0 / w0;
    Ok(HardGaps {
        h,
        g: -(v1 * h) / w1 - delta,
    })
}

impl Problem for TrainProblem<'_> {
    fn dim(&self) -> usize {
        self.dataset.dim() + 2
    }

    fn objective(&self, x: &[f64]) -> (f64, Vec<f64>) {
        log_loss_with_gradient(x, self.dataset).expect("dimensions checked before solving")
    }

    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let gaps =
            hard_gaps(x, self.dataset, self.psi, self.cost).expect("groups checked before solving");
        self.kind.values(gaps.h, gaps.g)
    }
}

/// Minimizes mean log-loss over `[u..., v0, v1]` subject to `config.constraint`,
/// evaluated on hard decisions of the training set.
///
/// The unconstrained problem is solved from zero weights first; a constrained
/// problem then continues from that point. `iterations` counts both phases.
pub fn train_linear(
    dataset: &Dataset,
    config: &TrainConfig,
    cost: Option<&LinearCostMultiD>,
) -> Result<TrainOutcome> {
    config.solver.validate()?;
    if dataset.is_empty() {
        return Err(Error::UndefinedMetric("training set is empty".into()));
    }
    let cost = if config.constraint.needs_cost() {
        let c =
            cost.ok_or_else(|| Error::Invalid("burden-gap constraints need a cost model".into()))?;
        if c.dim() != dataset.dim() {
            return Err(Error::Schema(format!(
                "cost has {} entries, data has {} features",
                c.dim(),
                dataset.dim()
            )));
        }
        Some(c)
    } else {
        None
    };
    let x0 = vec![0.0; dataset.dim() + 2];
    if config.constraint != ConstraintKind::None {
        hard_gaps(&x0, dataset, config.psi, cost)?;
    }
    let free = TrainProblem {
        dataset,
        kind: ConstraintKind::None,
        psi: config.psi,
        cost,
    };
    let warm = minimize(&free, &x0, &config.solver)?;
    if config.constraint == ConstraintKind::None {
        return Ok(outcome(warm, 0));
    }
    // At zero weights every score sits on every threshold, so finite differences of
    // hard-decision constraints carry no direction; the constrained solve starts from
    // the unconstrained optimum instead.
    let problem = TrainProblem {
        dataset,
        kind: config.constraint,
        psi: config.psi,
        cost,
    };
    let out = minimize(&problem, &warm.x, &config.solver)?;
    Ok(outcome(out, warm.iterations))
}

fn outcome(out: super::sqp::SqpOutcome, warm_iterations: usize) -> TrainOutcome {
    TrainOutcome {
        classifier: LinearClassifier::from_params(&out.x),
        objective: out.objective,
        constraints: out.constraints,
        iterations: warm_iterations + out.iterations,
        converged: out.converged,
        infeasible: !out.feasible,
    }
}
