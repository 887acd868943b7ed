//! JSON experiment configurations. Every struct rejects unknown keys and fills
//! missing ones with the documented defaults; `validate` runs before any work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CommonArgs;
use crate::datagen::{ADULT_BASE_COSTS, GROUP0_MULTIPLIER};
use crate::domain::{CostModel1D, LinearCostMultiD, QuadraticCostMultiD, Schema, SubPopCondition};
use crate::error::{Error, Result};
use crate::train::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PsiChoice {
    Sr,
    Tpr,
    Both,
}

impl PsiChoice {
    pub fn conditions(self) -> Vec<SubPopCondition> {
        match self {
            PsiChoice::Sr => vec![SubPopCondition::All],
            PsiChoice::Tpr => vec![SubPopCondition::PositiveLabel],
            PsiChoice::Both => vec![SubPopCondition::All, SubPopCondition::PositiveLabel],
        }
    }
}

/// Reads a configuration file, or returns the defaults when there is none.
pub fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("config {}: {e}", p.display())))
        }
    }
}

pub(crate) fn override_common(
    seed: &mut u64,
    psi: &mut PsiChoice,
    out: &mut Option<PathBuf>,
    args: &CommonArgs,
) {
    if let Some(s) = args.seed {
        *seed = s;
    }
    if let Some(p) = args.psi {
        *psi = p;
    }
    if args.out.is_some() {
        out.clone_from(&args.out);
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be finite, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "{name} must be a finite nonnegative number, got {v}"
        )))
    }
}

/// Evenly spaced thresholds `lo, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        finite("grid lo", self.lo)?;
        finite("grid hi", self.hi)?;
        crate::train::linear_grid(self.lo, self.hi, self.count)
    }
}

/// Per-feature manipulation costs by feature name; features not listed cannot
/// be moved. Group 0 pays `group0_multiplier` times the listed cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureCosts {
    pub costs: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub group0_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl FeatureCosts {
    /// The survey-data defaults: worker class 100, occupation 10, hours 1, and a
    /// group-0 multiplier of 2.
    pub fn adult_default() -> Self {
        Self {
            costs: ADULT_BASE_COSTS
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            group0_multiplier: GROUP0_MULTIPLIER,
        }
    }

    pub fn resolve(&self, schema: &Schema) -> Result<LinearCostMultiD> {
        if let Some(unknown) = self
            .costs
            .keys()
            .find(|k| !schema.feature_names.contains(k))
        {
            return Err(Error::Schema(format!(
                "cost given for unknown feature `{unknown}`"
            )));
        }
        if self.costs.is_empty() {
            return Err(Error::Invalid(
                "cost map is empty; at least one feature must be movable".into(),
            ));
        }
        let base = schema
            .feature_names
            .iter()
            .map(|n| self.costs.get(n).copied().unwrap_or(f64::INFINITY))
            .collect();
        LinearCostMultiD::with_group0_multiplier(base, self.group0_multiplier)
    }
}

/// One-dimensional cost used by threshold sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Cost1DSpec {
    /// a_z · (x2 − x1)
    Linear {
        #[serde(default = "one")]
        a0: f64,
        #[serde(default = "one")]
        a1: f64,
    },
    /// x2² − x1²
    Quadratic,
}

impl Cost1DSpec {
    /// Short label used in output file names.
    pub fn name(&self) -> String {
        match *self {
            Cost1DSpec::Linear { a0, a1 } if a0 == 1.0 && a1 == 1.0 => "linear".into(),
            Cost1DSpec::Linear { a0, a1 } => format!("linear_{a0}_{a1}"),
            Cost1DSpec::Quadratic => "quadratic".into(),
        }
    }

    pub fn model(&self) -> Result<CostModel1D> {
        match *self {
            Cost1DSpec::Linear { a0, a1 } => CostModel1D::scaled_linear(a0, a1),
            Cost1DSpec::Quadratic => Ok(CostModel1D::quadratic_separable()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub psi: PsiChoice,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0_grid: Vec<f64>,
    pub n_per_group: usize,
    pub repetitions: usize,
    /// |H| bound of the first classifier.
    pub eps: f64,
    /// |G| bound of the second classifier.
    pub gamma: f64,
    /// Thresholds per group, spread evenly over the realized feature range.
    pub grid_points: usize,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            psi: PsiChoice::Sr,
            mu0: 5.0,
            mu1: 10.0,
            sigma0_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            n_per_group: 500,
            repetitions: 50,
            eps: 0.4,
            gamma: 4.0,
            grid_points: 100,
            out: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        finite("mu0", self.mu0)?;
        finite("mu1", self.mu1)?;
        if self.sigma0_grid.is_empty() {
            return Err(Error::Invalid("sigma0_grid is empty".into()));
        }
        if let Some(s) = self
            .sigma0_grid
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::Invalid(format!(
                "sigma0 values must be positive, got {s}"
            )));
        }
        if self.n_per_group < 2 {
            return Err(Error::Invalid("n_per_group must be at least 2".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Invalid("repetitions must be positive".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::Invalid("grid_points must be positive".into()));
        }
        nonnegative("eps", self.eps)?;
        nonnegative("gamma", self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSource {
    /// The built-in surrogate score table, sampled with the master seed.
    Surrogate {
        #[serde(default)]
        counts: Option<[usize; 2]>,
    },
    /// A score table CSV, sampled with the master seed.
    Tables { path: PathBuf, counts: [usize; 2] },
    /// A one-feature dataset CSV, used as is.
    Csv { path: PathBuf },
}

impl SweepSource {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            SweepSource::Surrogate { counts: Some(c) } | SweepSource::Tables { counts: c, .. } => {
                *c
            }
            _ => crate::datagen::surrogate_fico_tables().counts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub seed: u64,
    pub psi: PsiChoice,
    pub source: SweepSource,
    /// Group-0 thresholds; defaults to 100 points over the observed feature range.
    pub grid0: Option<GridSpec>,
    /// Group-1 thresholds; defaults to `grid0`.
    pub grid1: Option<GridSpec>,
    pub costs: Vec<Cost1DSpec>,
    /// Feasible cells have constraint_lhs ≤ g.
    pub g: f64,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            psi: PsiChoice::Both,
            source: SweepSource::Surrogate { counts: None },
            grid0: None,
            grid1: None,
            costs: vec![
                Cost1DSpec::Linear { a0: 1.0, a1: 1.0 },
                Cost1DSpec::Quadratic,
            ],
            g: 0.0,
            out: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        finite("g", self.g)?;
        if self.costs.is_empty() {
            return Err(Error::Invalid("costs is empty".into()));
        }
        let mut names: Vec<String> = self.costs.iter().map(Cost1DSpec::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("costs contains duplicates".into()));
        }
        for c in &self.costs {
            c.model()?;
        }
        for g in self.grid0.iter().chain(&self.grid1) {
            g.values()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainData {
    /// Generated survey-like data with nine features.
    AdultLike {
        n: usize,
        data_seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

/// Seed of the survey-like dataset that ships with the crate.
pub const ADULT_DATA_SEED: u64 = 2024;
pub const ADULT_DATA_ROWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainExperimentConfig {
    pub seed: u64,
    pub psi: PsiChoice,
    pub data: TrainData,
    pub cost: FeatureCosts,
    pub splits: usize,
    pub test_fraction: f64,
    /// Statistical-rate constraint H ≥ eps.
    pub eps: f64,
    /// Burden-gap constraint G ≤ g.
    pub g: f64,
    /// Extra eps values for the statistical-rate trade-off table.
    pub eps_grid: Vec<f64>,
    /// Extra g values for the burden-gap trade-off table.
    pub g_grid: Vec<f64>,
    pub solver: SolverConfig,
    pub save_classifiers: bool,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for TrainExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            psi: PsiChoice::Sr,
            data: TrainData::AdultLike {
                n: ADULT_DATA_ROWS,
                data_seed: ADULT_DATA_SEED,
            },
            cost: FeatureCosts::adult_default(),
            splits: 100,
            test_fraction: 0.2,
            eps: 0.0,
            g: 0.0,
            eps_grid: vec![],
            g_grid: vec![],
            solver: SolverConfig::default(),
            save_classifiers: true,
            out: None,
        }
    }
}

impl TrainExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(Error::Invalid("splits must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Invalid(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        for (name, v) in [("eps", self.eps), ("g", self.g)] {
            finite(name, v)?;
        }
        for v in self.eps_grid.iter().chain(&self.g_grid) {
            finite("trade-off grid value", *v)?;
        }
        if !(self.cost.group0_multiplier > 0.0 && self.cost.group0_multiplier.is_finite()) {
            return Err(Error::Invalid("group0_multiplier must be positive".into()));
        }
        if let TrainData::AdultLike { n, .. } = self.data {
            if n < 10 {
                return Err(Error::Invalid(
                    "generated dataset needs at least 10 rows".into(),
                ));
            }
        }
        self.solver.validate()
    }
}

/// Cost model for an audit; one-dimensional kinds go with threshold classifiers,
/// the others with linear classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditCost {
    Linear1d {
        #[serde(default = "one")]
        a0: f64,
        #[serde(default = "one")]
        a1: f64,
    },
    Quadratic1d,
    Linear {
        costs: BTreeMap<String, f64>,
        #[serde(default = "one")]
        group0_multiplier: f64,
    },
    /// (x2 − x1)ᵀ B (x2 − x1) with B given row by row.
    Quadratic {
        matrix: Vec<Vec<f64>>,
    },
}

impl AuditCost {
    pub fn quadratic(&self) -> Result<Option<QuadraticCostMultiD>> {
        match self {
            AuditCost::Quadratic { matrix } => QuadraticCostMultiD::from_rows(matrix).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub seed: u64,
    pub psi: PsiChoice,
    pub data: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub cost: AuditCost,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            psi: PsiChoice::Both,
            data: None,
            classifier: None,
            cost: AuditCost::Linear1d { a0: 1.0, a1: 1.0 },
            out: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<SynthConfig>(r#"{"repetitons": 3}"#).is_err());
        assert!(serde_json::from_str::<SweepConfig>(
            r#"{"costs": [{"kind": "linear", "scale": 2}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<SweepConfig>(
            r#"{"source": {"kind": "csv", "path": "a", "x": 1}}"#
        )
        .is_err());
        assert!(
            serde_json::from_str::<TrainExperimentConfig>(r#"{"solver": {"maxiter": 3}}"#).is_err()
        );
    }

    #[test]
    fn partial_configs_fill_defaults() {
        let c: SynthConfig = serde_json::from_str(r#"{"repetitions": 3}"#).unwrap();
        assert_eq!(c.repetitions, 3);
        assert_eq!(c.sigma0_grid.len(), 5);
        let s: SweepConfig =
            serde_json::from_str(r#"{"costs": [{"kind": "linear", "a0": 2}]}"#).unwrap();
        assert_eq!(s.costs, vec![Cost1DSpec::Linear { a0: 2.0, a1: 1.0 }]);
        assert_eq!(s.costs[0].name(), "linear_2_1");
    }

    #[test]
    fn output_directory_does_not_enter_the_serialized_form() {
        let mut c = SynthConfig::default();
        let a = serde_json::to_string(&c).unwrap();
        c.out = Some("elsewhere".into());
        assert_eq!(a, serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn validation_catches_bad_values() {
        let c = SynthConfig {
            sigma0_grid: vec![],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let s = SweepConfig {
            grid0: Some(GridSpec {
                lo: 0.0,
                hi: 1.0,
                count: 0,
            }),
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let t = TrainExperimentConfig {
            test_fraction: 1.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn feature_costs_resolve_by_name() {
        let schema = Schema::new(vec!["a".into(), "b".into()], vec![true, true]).unwrap();
        let fc = FeatureCosts {
            costs: [("b".to_string(), 3.0)].into(),
            group0_multiplier: 2.0,
        };
        let c = fc.resolve(&schema).unwrap();
        assert_eq!(c.vector(crate::domain::Group::Zero), &[f64::INFINITY, 6.0]);
        assert_eq!(c.vector(crate::domain::Group::One), &[f64::INFINITY, 3.0]);
        let bad = FeatureCosts {
            costs: [("c".to_string(), 1.0)].into(),
            group0_multiplier: 1.0,
        };
        assert!(bad.resolve(&schema).is_err());
    }
}
