use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::audit::ClassifierArtifact;
use super::config::{TrainData, TrainExperimentConfig};
use super::output::{ensure_dir, num, opt, Provenance};
use super::svg::{line_plot, CsvTable, LineSeries};
use crate::datagen::{
    derive_seed, generate_adult_like, load_csv_dataset, normalize_fit_apply, train_test_split,
    RNG_NAME,
};
use crate::domain::{
    Classifier, CostModel, Dataset, LinearCostMultiD, Normalization, SubPopCondition,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, metrics_report};
use crate::numeric::{mean, mean_stderr};
use crate::response::ResponseSemantics;
use crate::train::{hard_gaps, train_linear, ConstraintKind, TrainConfig};

/// Which output table a result belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Main,
    TradeoffSr,
    TradeoffStrat,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::Main => "main",
            Table::TradeoffSr => "tradeoff_sr",
            Table::TradeoffStrat => "tradeoff_strat",
        }
    }
}

/// One trained model on one split, evaluated for one ψ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub table: Table,
    pub split: usize,
    pub seed: u64,
    pub model: &'static str,
    pub psi: SubPopCondition,
    /// eps of a statistical-rate constraint or g of a burden-gap constraint.
    pub param: Option<f64>,
    pub converged: bool,
    pub infeasible: bool,
    pub iterations: usize,
    pub objective: f64,
    pub train_h: f64,
    /// Burden gap on the training partition from the linear-cost identity.
    pub train_g: f64,
    pub test_accuracy: f64,
    /// `None` when a metric is undefined on the test partition.
    pub test_h: Option<f64>,
    pub test_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: &'static str,
    pub psi: &'static str,
    pub param: Option<f64>,
    pub n_used: usize,
    pub n_infeasible: usize,
    pub n_undefined: usize,
    pub accuracy: Option<(f64, f64)>,
    pub h: Option<(f64, f64)>,
    pub g: Option<(f64, f64)>,
    pub abs_g_mean: Option<f64>,
    pub train_g_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub results: Vec<SplitResult>,
    pub summary: Vec<ModelSummary>,
    pub tradeoff_sr: Vec<ModelSummary>,
    pub tradeoff_strat: Vec<ModelSummary>,
}

struct Split {
    seed: u64,
    train: Dataset,
    test: Dataset,
    norm: Normalization,
}

#[derive(Clone, Copy)]
struct Job {
    table: Table,
    model: &'static str,
    /// `None` trains once and is evaluated for every requested ψ.
    psi: Option<SubPopCondition>,
    constraint: ConstraintKind,
    param: Option<f64>,
}

fn load_data(cfg: &TrainExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        TrainData::AdultLike { n, data_seed } => generate_adult_like(*n, *data_seed),
        TrainData::Csv { path } => load_csv_dataset(path, None),
    }
}

fn jobs(cfg: &TrainExperimentConfig, psis: &[SubPopCondition]) -> Vec<Job> {
    let mut jobs = vec![Job {
        table: Table::Main,
        model: "f_uncons",
        psi: None,
        constraint: ConstraintKind::None,
        param: None,
    }];
    for &psi in psis {
        let sr = |eps: f64, table| Job {
            table,
            model: "f_sr",
            psi: Some(psi),
            constraint: ConstraintKind::StatRateAtLeast { eps },
            param: Some(eps),
        };
        let strat = |g: f64, table| Job {
            table,
            model: "f_strat",
            psi: Some(psi),
            constraint: ConstraintKind::BurdenGapAtMost { g },
            param: Some(g),
        };
        jobs.push(sr(cfg.eps, Table::Main));
        jobs.push(strat(cfg.g, Table::Main));
        jobs.extend(cfg.eps_grid.iter().map(|&e| sr(e, Table::TradeoffSr)));
        jobs.extend(cfg.g_grid.iter().map(|&g| strat(g, Table::TradeoffStrat)));
    }
    jobs
}

fn evaluate(
    split: &Split,
    classifier: &Classifier,
    cost: &LinearCostMultiD,
    psi: SubPopCondition,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let acc = accuracy(&split.test, classifier)?;
    match metrics_report(
        &split.test,
        classifier,
        &CostModel::Linear(cost.clone()),
        psi,
        ResponseSemantics::BoundaryCost,
    ) {
        Ok(m) => Ok((acc, Some(m.h_gap), Some(m.g_gap))),
        Err(Error::UndefinedMetric(_) | Error::InfeasibleManipulation(_)) => Ok((acc, None, None)),
        Err(e) => Err(e),
    }
}

fn run_job(
    cfg: &TrainExperimentConfig,
    psis: &[SubPopCondition],
    index: usize,
    split: &Split,
    job: &Job,
    cost: &LinearCostMultiD,
) -> Result<(Vec<SplitResult>, ClassifierArtifact)> {
    let tc = TrainConfig {
        constraint: job.constraint,
        psi: job.psi.unwrap_or(SubPopCondition::All),
        solver: cfg.solver,
        seed: split.seed,
    };
    let out = train_linear(&split.train, &tc, Some(cost))?;
    if out.infeasible {
        eprintln!(
            "split {index}: {} ({}) found no iterate meeting the constraint; excluded from means",
            job.model,
            tc.psi.short_name()
        );
    }
    let classifier = Classifier::Linear(out.classifier.clone());
    let eval_psis: Vec<SubPopCondition> = job.psi.map_or_else(|| psis.to_vec(), |p| vec![p]);
    let mut rows = Vec::new();
    for psi in eval_psis {
        let gaps = hard_gaps(&out.classifier.to_params(), &split.train, psi, Some(cost))?;
        let (test_accuracy, test_h, test_g) = evaluate(split, &classifier, cost, psi)?;
        rows.push(SplitResult {
            table: job.table,
            split: index,
            seed: split.seed,
            model: job.model,
            psi,
            param: job.param,
            converged: out.converged,
            infeasible: out.infeasible,
            iterations: out.iterations,
            objective: out.objective,
            train_h: gaps.h,
            train_g: gaps.g,
            test_accuracy,
            test_h,
            test_g,
        });
    }
    let metadata = serde_json::json!({
        "model": job.model,
        "psi": job.psi.map(SubPopCondition::short_name),
        "constraint": job.constraint,
        "split": index,
        "split_seed": split.seed,
        "rng": RNG_NAME,
        "objective": out.objective,
        "iterations": out.iterations,
        "converged": out.converged,
        "infeasible": out.infeasible,
    });
    let artifact = ClassifierArtifact {
        classifier,
        normalization: Some(split.norm.clone()),
        metadata: Some(metadata),
    };
    Ok((rows, artifact))
}

fn summarize(
    results: &[&SplitResult],
    model: &'static str,
    psi: SubPopCondition,
    param: Option<f64>,
) -> ModelSummary {
    let used: Vec<&&SplitResult> = results
        .iter()
        .filter(|r| !r.infeasible && r.test_g.is_some())
        .collect();
    let pick =
        |f: &dyn Fn(&SplitResult) -> f64| -> Vec<f64> { used.iter().map(|r| f(r)).collect() };
    let g = pick(&|r| r.test_g.expect("filtered"));
    ModelSummary {
        model,
        psi: psi.short_name(),
        param,
        n_used: used.len(),
        n_infeasible: results.iter().filter(|r| r.infeasible).count(),
        n_undefined: results
            .iter()
            .filter(|r| !r.infeasible && r.test_g.is_none())
            .count(),
        accuracy: mean_stderr(&pick(&|r| r.test_accuracy)),
        h: mean_stderr(&pick(&|r| r.test_h.expect("defined with g"))),
        abs_g_mean: mean(&g.iter().map(|v| v.abs()).collect::<Vec<_>>()),
        g: mean_stderr(&g),
        train_g_mean: mean(&pick(&|r| r.train_g)),
    }
}

fn summaries(results: &[SplitResult], table: Table) -> Vec<ModelSummary> {
    let mut keys: Vec<(&'static str, SubPopCondition, Option<f64>)> = vec![];
    for r in results.iter().filter(|r| r.table == table) {
        let key = (r.model, r.psi, r.param);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(model, psi, param)| {
            let rs: Vec<&SplitResult> = results
                .iter()
                .filter(|r| {
                    r.table == table && r.model == model && r.psi == psi && r.param == param
                })
                .collect();
            summarize(&rs, model, psi, param)
        })
        .collect()
}

const SUMMARY_COLUMNS: [&str; 15] = [
    "model",
    "psi",
    "param",
    "n_used",
    "n_infeasible",
    "n_undefined",
    "accuracy_mean",
    "accuracy_stderr",
    "h_mean",
    "h_stderr",
    "g_mean",
    "g_stderr",
    "abs_g_mean",
    "train_g_mean",
    "splits",
];

fn summary_row(s: &ModelSummary, splits: usize) -> Vec<String> {
    let pair = |p: Option<(f64, f64)>| [opt(p.map(|x| x.0)), opt(p.map(|x| x.1))];
    let mut row = vec![
        s.model.to_string(),
        s.psi.to_string(),
        opt(s.param),
        s.n_used.to_string(),
        s.n_infeasible.to_string(),
        s.n_undefined.to_string(),
    ];
    row.extend(pair(s.accuracy));
    row.extend(pair(s.h));
    row.extend(pair(s.g));
    row.extend([opt(s.abs_g_mean), opt(s.train_g_mean), splits.to_string()]);
    row
}

/// Trains f_uncons, f_sr(eps) and f_strat(g) on every split and writes
/// `train_summary.csv`, `train_splits.csv`, the trade-off tables and plots when
/// their grids are nonempty, and (optionally) one JSON file per main classifier
/// under `classifiers/`.
pub fn run_train(cfg: &TrainExperimentConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    let prov = Provenance::new(cfg)?;
    let psis = cfg.psi.conditions();
    let data = load_data(cfg)?;
    let cost = cfg.cost.resolve(data.schema())?;
    let splits = (0..cfg.splits)
        .map(|r| {
            let seed = derive_seed(cfg.seed, r as u64);
            let (train, test) = train_test_split(&data, cfg.test_fraction, seed)?;
            let (train, others, norm) = normalize_fit_apply(&train, &[&test])?;
            let test = others.into_iter().next().expect("one extra partition");
            Ok(Split {
                seed,
                train,
                test,
                norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs = jobs(cfg, &psis);
    let pairs: Vec<(usize, usize)> = (0..splits.len())
        .flat_map(|s| (0..jobs.len()).map(move |j| (s, j)))
        .collect();
    let outputs = pairs
        .par_iter()
        .map(|&(s, j)| run_job(cfg, &psis, s, &splits[s], &jobs[j], &cost))
        .collect::<Result<Vec<_>>>()?;

    ensure_dir(out)?;
    let results: Vec<SplitResult> = outputs.iter().flat_map(|o| o.0.iter().cloned()).collect();
    if cfg.save_classifiers {
        let dir = out.join("classifiers");
        ensure_dir(&dir)?;
        for (&(s, j), (_, artifact)) in pairs.iter().zip(&outputs) {
            let job = &jobs[j];
            if job.table != Table::Main {
                continue;
            }
            let name = match job.psi {
                Some(p) => format!("split{s:03}_{}_{}.json", job.model, p.short_name()),
                None => format!("split{s:03}_{}.json", job.model),
            };
            let mut artifact = artifact.clone();
            if let Some(serde_json::Value::Object(m)) = artifact.metadata.as_mut() {
                m.insert("tool_version".into(), prov.version.into());
                m.insert("config_sha256".into(), prov.config_sha256.clone().into());
            }
            prov.write_json(&dir.join(name), &artifact)?;
        }
    }

    prov.write_csv(
        &out.join("train_splits.csv"),
        &[
            "table",
            "split",
            "seed",
            "model",
            "psi",
            "param",
            "converged",
            "infeasible",
            "iterations",
            "objective",
            "train_h",
            "train_g",
            "test_accuracy",
            "test_h",
            "test_g",
        ],
        results.iter().map(|r| {
            vec![
                r.table.name().to_string(),
                r.split.to_string(),
                r.seed.to_string(),
                r.model.to_string(),
                r.psi.short_name().to_string(),
                opt(r.param),
                r.converged.to_string(),
                r.infeasible.to_string(),
                r.iterations.to_string(),
                num(r.objective),
                num(r.train_h),
                num(r.train_g),
                num(r.test_accuracy),
                opt(r.test_h),
                opt(r.test_g),
            ]
        }),
    )?;

    let summary = summaries(&results, Table::Main);
    prov.write_csv(
        &out.join("train_summary.csv"),
        &SUMMARY_COLUMNS,
        summary.iter().map(|s| summary_row(s, cfg.splits)),
    )?;
    let tradeoff_sr = summaries(&results, Table::TradeoffSr);
    let tradeoff_strat = summaries(&results, Table::TradeoffStrat);
    for (rows, stem, param) in [
        (&tradeoff_sr, "tradeoff_sr", "eps"),
        (&tradeoff_strat, "tradeoff_strat", "g"),
    ] {
        if rows.is_empty() {
            continue;
        }
        let path = out.join(format!("{stem}.csv"));
        prov.write_csv(
            &path,
            &SUMMARY_COLUMNS,
            rows.iter().map(|s| summary_row(s, cfg.splits)),
        )?;
        for &psi in &psis {
            plot_tradeoff(
                &path,
                &out.join(format!("{stem}_{}.svg", psi.short_name())),
                param,
                psi,
            )?;
        }
    }
    Ok(TrainReport {
        results,
        summary,
        tradeoff_sr,
        tradeoff_strat,
    })
}

fn plot_tradeoff(
    csv_path: &Path,
    svg_path: &Path,
    param: &str,
    psi: SubPopCondition,
) -> Result<()> {
    let table = CsvTable::read(csv_path)?;
    let psi_col = table.strings("psi")?;
    let x = table.numbers("param")?;
    let mut series = Vec::new();
    for (label, col) in [
        ("test accuracy", "accuracy"),
        ("test H", "h"),
        ("test G", "g"),
    ] {
        let m = table.numbers(&format!("{col}_mean"))?;
        let e = table.numbers(&format!("{col}_stderr"))?;
        let points = (0..table.rows.len())
            .filter(|&r| psi_col[r] == psi.short_name())
            .filter_map(|r| Some((x[r]?, m[r]?, e[r])))
            .collect();
        series.push(LineSeries {
            label: label.into(),
            points,
        });
    }
    let title = format!("Trade-off over {param} (psi = {})", psi.short_name());
    std::fs::write(
        svg_path,
        line_plot(&title, param, "mean over splits (± stderr)", &series),
    )?;
    Ok(())
}
