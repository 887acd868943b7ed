//! Exhaustive search over group-specific thresholds.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_from_inputs, GapInputs};
use crate::domain::{
    Classifier, CostModel, CostModel1D, Dataset, Group, SubPopCondition, ThresholdClassifier,
};
use crate::error::{Error, Result};
use crate::metrics::{p_e_from_view, rate, ScoredGroup};
use crate::response::{gradient_bounds_1d, FeatureRange, GradientBounds, ResponseSemantics};

/// Metrics of one cell for one ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub h: f64,
    pub g: f64,
    /// Upper bound on G from the per-group gradient bounds of the sweep's cost.
    pub constraint_lhs: f64,
    pub feasible: bool,
    /// Negatively classified ψ-qualifying samples in each group.
    pub negatives: [usize; 2],
}

impl CellMetrics {
    /// Neither group has a negatively classified ψ-qualifying sample, so G = 0
    /// and the bound collapses to 0 whatever the thresholds.
    pub fn no_negatives(&self) -> bool {
        self.negatives == [0, 0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub tau0: f64,
    pub tau1: f64,
    pub accuracy: f64,
    /// `None` when ψ_sr was not requested or a group has no qualifying samples.
    pub sr: Option<CellMetrics>,
    pub tpr: Option<CellMetrics>,
}

impl SweepRecord {
    pub fn cell(&self, psi: SubPopCondition) -> Option<&CellMetrics> {
        match psi {
            SubPopCondition::All => self.sr.as_ref(),
            SubPopCondition::PositiveLabel => self.tpr.as_ref(),
        }
    }

    pub fn classifier(&self) -> ThresholdClassifier {
        ThresholdClassifier::new(self.tau0, self.tau1)
    }
}

/// Per-threshold statistics of one group for one ψ.
#[derive(Debug, Clone, Copy)]
struct GroupCell {
    h: f64,
    burden: f64,
    p: f64,
    e: f64,
    neg: usize,
}

struct GroupTable {
    correct: Vec<usize>,
    /// Indexed by ψ slot (sr, tpr), then by threshold.
    psi: [Option<Vec<GroupCell>>; 2],
}

fn psi_slot(psi: SubPopCondition) -> usize {
    match psi {
        SubPopCondition::All => 0,
        SubPopCondition::PositiveLabel => 1,
    }
}

fn group_table(
    dataset: &Dataset,
    group: Group,
    grid: &[f64],
    psis: &[SubPopCondition],
    cost: &CostModel,
) -> Result<GroupTable> {
    let identity = |x: &[f64]| x[0];
    let everyone = ScoredGroup::new(dataset, SubPopCondition::All, group, identity);
    let mut positives_before = Vec::with_capacity(everyone.len() + 1);
    positives_before.push(0usize);
    for (_, s) in &everyone.members {
        positives_before.push(positives_before.last().unwrap() + s.label as usize);
    }
    let total_pos = *positives_before.last().unwrap();
    let correct = grid
        .iter()
        .map(|&tau| {
            let k = everyone.negatives_below(tau);
            (total_pos - positives_before[k]) + (k - positives_before[k])
        })
        .collect();

    let mut tables: [Option<Vec<GroupCell>>; 2] = [None, None];
    for &psi in psis {
        let view = ScoredGroup::new(dataset, psi, group, identity);
        if view.is_empty() {
            continue;
        }
        let n = view.len();
        let cells = grid
            .par_iter()
            .map(|&tau| {
                let f = Classifier::Threshold(ThresholdClassifier::new(tau, tau));
                let neg = view.negatives_below(tau);
                let burden =
                    view.cost_sum(neg, &f, cost, ResponseSemantics::BoundaryCost)? / n as f64;
                let (p, e) = p_e_from_view(&view, tau)?;
                Ok(GroupCell {
                    h: rate(n - neg, n),
                    burden,
                    p,
                    e,
                    neg,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tables[psi_slot(psi)] = Some(cells);
    }
    Ok(GroupTable {
        correct,
        psi: tables,
    })
}

/// Gradient bounds of the cost over the span of the data and both grids.
fn sweep_gradient_bounds(
    dataset: &Dataset,
    grids: [&[f64]; 2],
    cost: &CostModel1D,
) -> Result<[GradientBounds; 2]> {
    let values = dataset
        .samples()
        .iter()
        .map(|s| s.features[0])
        .chain(grids.into_iter().flatten().copied());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    gradient_bounds_1d(cost, FeatureRange::new(lo, hi)?)
}

/// Evaluates every (τ0, τ1) in `grid0 × grid1`, row-major with τ0 outer.
///
/// For each ψ in `psis` a record carries H, G under boundary-cost semantics, the
/// upper bound on G from the cost's gradient bounds, and whether that bound is at
/// most `g_target`. Under the unit linear cost the bound equals
/// −τ1·H − (τ1 − τ0)·P_0 + E_1 − E_0. A ψ for which some group has no qualifying
/// sample is recorded as missing in every cell.
pub fn sweep_thresholds(
    dataset: &Dataset,
    grid0: &[f64],
    grid1: &[f64],
    psis: &[SubPopCondition],
    cost: &CostModel1D,
    g_target: f64,
) -> Result<Vec<SweepRecord>> {
    if grid0.is_empty() || grid1.is_empty() {
        return Err(Error::Invalid("threshold grids must be nonempty".into()));
    }
    if grid0.iter().chain(grid1).any(|t| !t.is_finite()) {
        return Err(Error::Invalid("thresholds must be finite".into()));
    }
    if dataset.dim() != 1 {
        return Err(Error::Schema(format!(
            "threshold sweep needs 1 feature, dataset has {}",
            dataset.dim()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::UndefinedMetric("sweep over an empty dataset".into()));
    }
    let grads = sweep_gradient_bounds(dataset, [grid0, grid1], cost)?;
    let model = CostModel::OneD(cost.clone());
    let t0 = group_table(dataset, Group::Zero, grid0, psis, &model)?;
    let t1 = group_table(dataset, Group::One, grid1, psis, &model)?;
    let n_total = dataset.len();

    let cells: Vec<(usize, usize)> = (0..grid0.len())
        .flat_map(|i| (0..grid1.len()).map(move |j| (i, j)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(i, j)| {
            let (tau0, tau1) = (grid0[i], grid1[j]);
            let cell = |slot: usize| -> Option<CellMetrics> {
                let a = t0.psi[slot].as_ref()?[i];
                let b = t1.psi[slot].as_ref()?[j];
                let inputs = GapInputs {
                    h: a.h - b.h,
                    p0: a.p,
                    p1: b.p,
                    e0: a.e,
                    e1: b.e,
                };
                let (_, upper) = bounds_from_inputs(&inputs, tau0, tau1, &grads);
                Some(CellMetrics {
                    h: inputs.h,
                    g: a.burden - b.burden,
                    constraint_lhs: upper,
                    feasible: upper <= g_target,
                    negatives: [a.neg, b.neg],
                })
            };
            SweepRecord {
                tau0,
                tau1,
                accuracy: rate(t0.correct[i] + t1.correct[j], n_total),
                sr: cell(0),
                tpr: cell(1),
            }
        })
        .collect())
}

/// Which records count as admissible in [`select_optimal`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feasibility {
    Always,
    /// constraint_lhs ≤ g
    ConstraintLhsAtMost {
        psi: SubPopCondition,
        g: f64,
    },
    /// |H| ≤ eps
    AbsStatRateAtMost {
        psi: SubPopCondition,
        eps: f64,
    },
    /// |G| ≤ gamma
    AbsBurdenAtMost {
        psi: SubPopCondition,
        gamma: f64,
    },
}

impl Feasibility {
    pub fn psi(&self) -> Option<SubPopCondition> {
        match *self {
            Feasibility::Always => None,
            Feasibility::ConstraintLhsAtMost { psi, .. }
            | Feasibility::AbsStatRateAtMost { psi, .. }
            | Feasibility::AbsBurdenAtMost { psi, .. } => Some(psi),
        }
    }

    /// How far the record misses the constraint (≤ 0 means admissible);
    /// `None` when the needed metric is missing.
    pub fn violation(&self, record: &SweepRecord) -> Option<f64> {
        match *self {
            Feasibility::Always => Some(0.0),
            Feasibility::ConstraintLhsAtMost { psi, g } => {
                record.cell(psi).map(|c| c.constraint_lhs - g)
            }
            Feasibility::AbsStatRateAtMost { psi, eps } => {
                record.cell(psi).map(|c| c.h.abs() - eps)
            }
            Feasibility::AbsBurdenAtMost { psi, gamma } => {
                record.cell(psi).map(|c| c.g.abs() - gamma)
            }
        }
    }

    pub fn admits(&self, record: &SweepRecord) -> bool {
        self.violation(record).is_some_and(|v| v <= 0.0)
    }
}

fn tie_break_g(record: &SweepRecord, psi: Option<SubPopCondition>) -> f64 {
    let cell = match psi {
        Some(p) => record.cell(p),
        None => record.sr.as_ref().or(record.tpr.as_ref()),
    };
    cell.map_or(f64::INFINITY, |c| c.g)
}

/// Highest-accuracy admissible record; ties go to the smaller G (for the
/// constraint's ψ, else ψ_sr), then to the lexicographically smaller (τ0, τ1).
pub fn select_optimal(records: &[SweepRecord], feasibility: &Feasibility) -> Result<SweepRecord> {
    let psi = feasibility.psi();
    let better = |a: &SweepRecord, b: &SweepRecord| -> Ordering {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then_with(|| tie_break_g(a, psi).total_cmp(&tie_break_g(b, psi)))
            .then_with(|| a.tau0.total_cmp(&b.tau0))
            .then_with(|| a.tau1.total_cmp(&b.tau1))
    };
    if let Some(best) = records
        .iter()
        .filter(|r| feasibility.admits(r))
        .min_by(|a, b| better(a, b))
    {
        return Ok(*best);
    }
    let tightest = records
        .iter()
        .filter_map(|r| feasibility.violation(r).map(|v| (v, r)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Err(Error::Infeasible(match tightest {
        Some((v, r)) => format!(
            "no record satisfies {feasibility:?}; tightest violation {v} at (tau0, tau1) = ({}, {})",
            r.tau0, r.tau1
        ),
        None => format!("no record satisfies {feasibility:?}; the constrained metric is missing everywhere"),
    }))
}

/// `lo, lo + step, ...` up to and including `hi` (within half a step).
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !(lo <= hi) {
        return Err(Error::Invalid(format!(
            "grid needs count > 0 and lo ≤ hi, got {count} points on [{lo}, {hi}]"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect())
}
