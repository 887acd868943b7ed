//! Python bindings for `burden-core`.
//!
//! Result records (metrics, bounds, sweep cells, training outcomes) come back as
//! plain dicts built from their JSON form. Non-finite floats such as an absent
//! lower bound therefore appear as `None`.

use std::path::PathBuf;

use burden_core::bounds::{
    burden_gap_bounds_1d, burden_gap_exact_linear, burden_gap_upper_quadratic, constraint_lhs_1d,
    BoundsReport,
};
use burden_core::datagen as gen;
use burden_core::domain::{
    self as dom, CostModel, CostModel1D, Group, LinearCostMultiD, QuadraticCostMultiD, Sample,
    Schema, SubPopCondition,
};
use burden_core::error::Error;
use burden_core::metrics::{feature_bias_check, metrics_report};
use burden_core::response::{FeatureRange, ResponseSemantics};
use burden_core::train::{self, ConstraintKind, SolverConfig, TrainConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(
    burden_py,
    BurdenError,
    PyException,
    "A computation with no valid answer."
);
create_exception!(
    burden_py,
    InfeasibleError,
    BurdenError,
    "No candidate satisfies the constraint."
);
create_exception!(
    burden_py,
    UndefinedMetricError,
    BurdenError,
    "A metric over an empty set was requested."
);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Infeasible(_) => InfeasibleError::new_err(msg),
        Error::UndefinedMetric(_) => UndefinedMetricError::new_err(msg),
        Error::InfeasibleManipulation(_)
        | Error::Numerical(_)
        | Error::MonotonicityViolation(_) => BurdenError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for burden_core::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_psi(psi: &str) -> PyResult<SubPopCondition> {
    match psi {
        "sr" => Ok(SubPopCondition::All),
        "tpr" => Ok(SubPopCondition::PositiveLabel),
        other => Err(PyValueError::new_err(format!(
            "psi must be 'sr' or 'tpr', got {other:?}"
        ))),
    }
}

fn parse_psis(psi: &str) -> PyResult<Vec<SubPopCondition>> {
    if psi == "both" {
        Ok(vec![SubPopCondition::All, SubPopCondition::PositiveLabel])
    } else {
        Ok(vec![parse_psi(psi)?])
    }
}

fn parse_semantics(s: &str) -> PyResult<ResponseSemantics> {
    match s {
        "boundary_cost" => Ok(ResponseSemantics::BoundaryCost),
        "rational" => Ok(ResponseSemantics::Rational),
        other => Err(PyValueError::new_err(format!(
            "semantics must be 'boundary_cost' or 'rational', got {other:?}"
        ))),
    }
}

fn group_of(z: u8) -> PyResult<Group> {
    Group::from_index(z).py()
}

/// A labelled dataset with a binary group attribute.
#[pyclass(frozen, module = "burden_py")]
struct Dataset {
    inner: dom::Dataset,
}

#[pymethods]
impl Dataset {
    /// `features` is a list of rows, `labels` and `groups` are 0/1 per row.
    #[new]
    #[pyo3(signature = (features, labels, groups, feature_names=None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        groups: Vec<u8>,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        if features.len() != labels.len() || features.len() != groups.len() {
            return Err(PyValueError::new_err(format!(
                "{} feature rows, {} labels, {} groups",
                features.len(),
                labels.len(),
                groups.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        let schema = match feature_names {
            Some(names) => {
                let n = names.len();
                Schema::new(names, vec![true; n]).py()?
            }
            None => Schema::anonymous(dim),
        };
        let mut samples = Vec::with_capacity(features.len());
        for ((x, y), z) in features.into_iter().zip(labels).zip(groups) {
            if y > 1 {
                return Err(PyValueError::new_err(format!(
                    "labels must be 0 or 1, got {y}"
                )));
            }
            samples.push(Sample::new(x, y == 1, group_of(z)?));
        }
        Ok(Self {
            inner: dom::Dataset::new(schema, samples).py()?,
        })
    }

    /// Reads a CSV whose last two columns are the label `y` and group `z`.
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: gen::load_csv_dataset(&path, None).py()?,
        })
    }

    /// One-feature data with group-specific normal features and labels drawn from
    /// a logistic function of the feature.
    #[staticmethod]
    #[pyo3(signature = (mu0, mu1, sigma0, n_per_group, seed=0))]
    fn synthetic(mu0: f64, mu1: f64, sigma0: f64, n_per_group: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: gen::generate_synthetic_1d(mu0, mu1, sigma0, n_per_group, seed).py()?,
        })
    }

    /// Nine-feature survey-like data; `adult_like(10000, 2024)` is the bundled CSV.
    #[staticmethod]
    #[pyo3(signature = (n, seed=2024))]
    fn adult_like(n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: gen::generate_adult_like(n, seed).py()?,
        })
    }

    /// Samples one score per person from the built-in two-group score table.
    #[staticmethod]
    #[pyo3(signature = (seed=0, counts=None))]
    fn score_table_sample(seed: u64, counts: Option<[usize; 2]>) -> PyResult<Self> {
        let mut t = gen::surrogate_fico_tables();
        if let Some(c) = counts {
            t = t.with_counts(c);
        }
        Ok(Self {
            inner: gen::sample_from_cdf_tables(&t, seed).py()?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        gen::write_csv_dataset(&self.inner, &path).py()
    }

    /// Seeded stratified split into `(train, test)`.
    #[pyo3(signature = (test_fraction=0.2, seed=0))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = gen::train_test_split(&self.inner, test_fraction, seed).py()?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    /// Whether group 0's feature distribution is strictly dominated by group 1's
    /// (one-feature data only).
    #[pyo3(signature = (psi="sr"))]
    fn feature_bias<'py>(&self, py: Python<'py>, psi: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &feature_bias_check(&self.inner, parse_psi(psi)?).py()?)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema().feature_names.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner
            .samples()
            .iter()
            .map(|s| s.features.clone())
            .collect()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.samples().iter().map(Sample::y).collect()
    }

    #[getter]
    fn groups(&self) -> Vec<usize> {
        self.inner
            .samples()
            .iter()
            .map(|s| s.group.index())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, dim={}, group0={}, group1={})",
            self.inner.len(),
            self.inner.dim(),
            self.inner.group_count(Group::Zero),
            self.inner.group_count(Group::One)
        )
    }
}

/// A group-aware threshold or linear classifier.
#[pyclass(frozen, module = "burden_py")]
struct Classifier {
    inner: dom::Classifier,
}

#[pymethods]
impl Classifier {
    /// Positive iff x ≥ tau_z for a one-feature sample in group z.
    #[staticmethod]
    fn threshold(tau0: f64, tau1: f64) -> Self {
        Self {
            inner: dom::Classifier::Threshold(dom::ThresholdClassifier::new(tau0, tau1)),
        }
    }

    /// Positive iff u·x ≥ v_z.
    #[staticmethod]
    fn linear(u: Vec<f64>, v0: f64, v1: f64) -> Self {
        Self {
            inner: dom::Classifier::Linear(dom::LinearClassifier::new(u, v0, v1)),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: dom::Classifier::from_json(text).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    fn decide(&self, x: Vec<f64>, group: u8) -> PyResult<bool> {
        self.inner.check_dim(x.len()).py()?;
        Ok(self.inner.decide(&x, group_of(group)?))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            dom::Classifier::Threshold(_) => "threshold",
            dom::Classifier::Linear(_) => "linear",
        }
    }

    /// `{"tau0", "tau1"}` or `{"u", "v0", "v1"}`.
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            dom::Classifier::Threshold(t) => {
                format!("Classifier.threshold({}, {})", t.tau0, t.tau1)
            }
            dom::Classifier::Linear(l) => {
                format!("Classifier.linear({:?}, {}, {})", l.u, l.v0, l.v1)
            }
        }
    }
}

/// A manipulation cost model.
#[pyclass(frozen, module = "burden_py")]
struct Cost {
    inner: CostModel,
}

#[pymethods]
impl Cost {
    /// One feature, c_z(x, x') = a_z·(x' − x) for x' ≥ x.
    #[staticmethod]
    #[pyo3(signature = (a0=1.0, a1=1.0))]
    fn linear_1d(a0: f64, a1: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CostModel::OneD(CostModel1D::scaled_linear(a0, a1).py()?),
        })
    }

    /// One feature, c(x, x') = (x' − x)² for x' ≥ x in both groups.
    #[staticmethod]
    fn quadratic_1d() -> Self {
        Self {
            inner: CostModel::OneD(CostModel1D::quadratic_separable()),
        }
    }

    /// Per-feature unit costs for each group; `float("inf")` marks a feature
    /// that cannot be changed.
    #[staticmethod]
    fn linear(d0: Vec<f64>, d1: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CostModel::Linear(LinearCostMultiD::new(d0, d1).py()?),
        })
    }

    /// c(x, x') = (x' − x)ᵀB(x' − x) with B symmetric positive definite.
    #[staticmethod]
    fn quadratic(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: CostModel::Quadratic(QuadraticCostMultiD::from_rows(&matrix).py()?),
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match &self.inner {
            CostModel::OneD(_) => "one_dimensional",
            CostModel::Linear(_) => "linear",
            CostModel::Quadratic(_) => "quadratic",
        }
    }
}

/// Accuracy, selection rates, social burdens and their group gaps.
#[pyfunction]
#[pyo3(signature = (data, classifier, cost, psi="sr", semantics="boundary_cost"))]
fn metrics<'py>(
    py: Python<'py>,
    data: &Dataset,
    classifier: &Classifier,
    cost: &Cost,
    psi: &str,
    semantics: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let (psi, sem) = (parse_psi(psi)?, parse_semantics(semantics)?);
    let report = py
        .detach(|| metrics_report(&data.inner, &classifier.inner, &cost.inner, psi, sem))
        .py()?;
    to_py(py, &report)
}

/// Bounds on the burden gap G.
///
/// Threshold classifiers take a one-feature cost; the gradient bounds are taken
/// over `feature_range` (default: the data and both thresholds). Linear
/// classifiers with a linear cost get the exact value; with a quadratic cost
/// only an upper bound (`lower` is `None`).
#[pyfunction]
#[pyo3(signature = (data, classifier, cost, psi="sr", feature_range=None))]
fn bounds<'py>(
    py: Python<'py>,
    data: &Dataset,
    classifier: &Classifier,
    cost: &Cost,
    psi: &str,
    feature_range: Option<(f64, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let psi = parse_psi(psi)?;
    let d = &data.inner;
    let report = match (&classifier.inner, &cost.inner) {
        (dom::Classifier::Threshold(t), CostModel::OneD(c)) => {
            let (lo, hi) = feature_range.unwrap_or_else(|| {
                d.samples()
                    .iter()
                    .map(|s| s.features[0])
                    .chain([t.tau0, t.tau1])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
            });
            let mut b = burden_gap_bounds_1d(d, t, psi, c, FeatureRange::new(lo, hi).py()?).py()?;
            b.constraint_lhs = Some(constraint_lhs_1d(d, t.tau0, t.tau1, psi).py()?);
            b
        }
        (dom::Classifier::Linear(l), CostModel::Linear(c)) => burden_gap_exact_linear(d, l, psi, c).py()?.into(),
        (dom::Classifier::Linear(l), CostModel::Quadratic(q)) => {
            let qb = burden_gap_upper_quadratic(d, l, psi, q).py()?;
            BoundsReport { lower: f64::NEG_INFINITY, upper: qb.upper, degenerate: qb.degenerate, ..Default::default() }
        }
        _ => {
            return Err(PyValueError::new_err(
                "threshold classifiers need a one-feature cost, linear classifiers a linear or quadratic cost",
            ))
        }
    };
    to_py(py, &report)
}

/// Upper bound on G under the unit linear cost for thresholds (tau0, tau1);
/// a pair is feasible for target g iff this is at most g.
#[pyfunction]
#[pyo3(signature = (data, tau0, tau1, psi="sr"))]
fn constraint_lhs(data: &Dataset, tau0: f64, tau1: f64, psi: &str) -> PyResult<f64> {
    constraint_lhs_1d(&data.inner, tau0, tau1, parse_psi(psi)?).py()
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
#[pyfunction]
fn linear_grid(lo: f64, hi: f64, count: usize) -> PyResult<Vec<f64>> {
    train::linear_grid(lo, hi, count).py()
}

/// Evaluates every (tau0, tau1) pair on the grids. Each record has the
/// thresholds, accuracy, and an `sr` / `tpr` cell (or `None` when not requested).
#[pyfunction]
#[pyo3(signature = (data, grid0, grid1, cost=None, psi="both", g=0.0))]
fn sweep<'py>(
    py: Python<'py>,
    data: &Dataset,
    grid0: Vec<f64>,
    grid1: Vec<f64>,
    cost: Option<&Cost>,
    psi: &str,
    g: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = match cost.map(|c| &c.inner) {
        None => CostModel1D::linear(),
        Some(CostModel::OneD(c)) => c.clone(),
        Some(_) => return Err(PyValueError::new_err("the sweep needs a one-feature cost")),
    };
    let psis = parse_psis(psi)?;
    let records = py
        .detach(|| train::sweep_thresholds(&data.inner, &grid0, &grid1, &psis, &c, g))
        .py()?;
    to_py(py, &records)
}

fn constraint_from(kind: &str, bound: Option<f64>) -> PyResult<ConstraintKind> {
    let need =
        || bound.ok_or_else(|| PyValueError::new_err(format!("constraint {kind:?} needs a bound")));
    Ok(match kind {
        "none" => ConstraintKind::None,
        "stat_rate_at_least" => ConstraintKind::StatRateAtLeast { eps: need()? },
        "burden_gap_at_most" => ConstraintKind::BurdenGapAtMost { g: need()? },
        "abs_burden_at_most" => ConstraintKind::AbsBurdenAtMost { gamma: need()? },
        "abs_stat_rate_at_most" => ConstraintKind::AbsStatRateAtMost { eps: need()? },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown constraint {other:?}"
            )))
        }
    })
}

/// Fits a linear classifier by minimizing log loss subject to an optional
/// fairness constraint. Returns `(classifier, outcome)` where `outcome` records
/// the objective, constraint values, iterations, and convergence flags.
#[pyfunction]
#[pyo3(signature = (data, constraint="none", bound=None, psi="sr", cost=None, max_iterations=100, ftol=1e-3, fd_eps=1e-3))]
#[allow(clippy::too_many_arguments)]
fn train_linear<'py>(
    py: Python<'py>,
    data: &Dataset,
    constraint: &str,
    bound: Option<f64>,
    psi: &str,
    cost: Option<&Cost>,
    max_iterations: usize,
    ftol: f64,
    fd_eps: f64,
) -> PyResult<(Classifier, Bound<'py, PyAny>)> {
    let config = TrainConfig {
        constraint: constraint_from(constraint, bound)?,
        psi: parse_psi(psi)?,
        solver: SolverConfig {
            max_iterations,
            ftol,
            fd_eps,
        },
        seed: 0,
    };
    let cost = match cost.map(|c| &c.inner) {
        None => None,
        Some(CostModel::Linear(c)) => Some(c.clone()),
        Some(_) => {
            return Err(PyValueError::new_err(
                "training needs a multi-feature linear cost",
            ))
        }
    };
    let outcome = py
        .detach(|| train::train_linear(&data.inner, &config, cost.as_ref()))
        .py()?;
    let clf = Classifier {
        inner: dom::Classifier::Linear(outcome.classifier.clone()),
    };
    Ok((clf, to_py(py, &outcome)?))
}

#[pymodule]
pub fn burden_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Dataset>()?;
    m.add_class::<Classifier>()?;
    m.add_class::<Cost>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(constraint_lhs, m)?)?;
    m.add_function(wrap_pyfunction!(linear_grid, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(train_linear, m)?)?;
    let py = m.py();
    m.add("BurdenError", py.get_type::<BurdenError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add(
        "UndefinedMetricError",
        py.get_type::<UndefinedMetricError>(),
    )?;
    Ok(())
}
