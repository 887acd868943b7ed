use std::path::Path;

use serde::Serialize;

use super::config::{SweepConfig, SweepSource};
use super::output::{ensure_dir, num, Provenance};
use super::svg::{scatter_plot, CsvTable, ScatterSeries};
use crate::datagen::{load_csv_dataset, sample_from_cdf_tables, surrogate_fico_tables, CdfTables};
use crate::domain::{Dataset, SubPopCondition};
use crate::error::{Error, Result};
use crate::train::{
    linear_grid, select_optimal, sweep_thresholds, CellMetrics, Feasibility, SweepRecord,
};

/// Results for one cost model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSweep {
    pub name: String,
    pub records: Vec<SweepRecord>,
    pub unconstrained: SweepRecord,
    /// Best record with constraint_lhs ≤ g for each requested ψ; `None` if none qualifies.
    pub constrained: Vec<(SubPopCondition, Option<SweepRecord>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub samples: usize,
    pub costs: Vec<CostSweep>,
}

const SWEEP_COLUMNS: [&str; 15] = [
    "tau0",
    "tau1",
    "accuracy",
    "h_sr",
    "g_sr",
    "h_tpr",
    "g_tpr",
    "constraint_lhs_sr",
    "constraint_lhs_tpr",
    "feasible_sr",
    "feasible_tpr",
    "negatives0_sr",
    "negatives1_sr",
    "negatives0_tpr",
    "negatives1_tpr",
];

fn load_source(cfg: &SweepConfig) -> Result<Dataset> {
    let data = match &cfg.source {
        SweepSource::Surrogate { counts } => {
            let t = surrogate_fico_tables();
            let t = match counts {
                Some(c) => t.with_counts(*c),
                None => t,
            };
            sample_from_cdf_tables(&t, cfg.seed)?
        }
        SweepSource::Tables { path, counts } => {
            sample_from_cdf_tables(&CdfTables::from_path(path, *counts)?, cfg.seed)?
        }
        SweepSource::Csv { path } => load_csv_dataset(path, None)?,
    };
    if data.dim() != 1 {
        return Err(Error::Schema(format!(
            "the sweep needs a one-feature dataset, got {} features",
            data.dim()
        )));
    }
    Ok(data)
}

fn cell_columns(c: Option<&CellMetrics>) -> [String; 4] {
    match c {
        Some(c) => [
            num(c.h),
            num(c.g),
            num(c.constraint_lhs),
            c.feasible.to_string(),
        ],
        None => Default::default(),
    }
}

fn negative_columns(c: Option<&CellMetrics>) -> [String; 2] {
    match c {
        Some(c) => [c.negatives[0].to_string(), c.negatives[1].to_string()],
        None => Default::default(),
    }
}

fn sweep_row(r: &SweepRecord) -> Vec<String> {
    let [h_sr, g_sr, lhs_sr, f_sr] = cell_columns(r.sr.as_ref());
    let [h_tpr, g_tpr, lhs_tpr, f_tpr] = cell_columns(r.tpr.as_ref());
    let mut row = vec![
        num(r.tau0),
        num(r.tau1),
        num(r.accuracy),
        h_sr,
        g_sr,
        h_tpr,
        g_tpr,
        lhs_sr,
        lhs_tpr,
        f_sr,
        f_tpr,
    ];
    row.extend(negative_columns(r.sr.as_ref()));
    row.extend(negative_columns(r.tpr.as_ref()));
    row
}

/// Sweeps every configured cost over the threshold grids and writes, per cost:
/// `sweep_<cost>.csv` (every cell), `feasible_<cost>_<psi>.csv` (cells with
/// constraint_lhs ≤ g), `optimum_<cost>.csv`, and H-vs-G and accuracy-vs-G
/// scatter plots per ψ.
pub fn run_sweep(cfg: &SweepConfig, out: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    let prov = Provenance::new(cfg)?;
    let data = load_source(cfg)?;
    let grid0 = match &cfg.grid0 {
        Some(g) => g.values()?,
        None => {
            let (lo, hi) = data
                .samples()
                .iter()
                .map(|s| s.features[0])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x), b.max(x))
                });
            linear_grid(lo, hi, 100)?
        }
    };
    let grid1 = match &cfg.grid1 {
        Some(g) => g.values()?,
        None => grid0.clone(),
    };
    let psis = cfg.psi.conditions();
    ensure_dir(out)?;

    let mut costs = Vec::new();
    for spec in &cfg.costs {
        let name = spec.name();
        let records = sweep_thresholds(&data, &grid0, &grid1, &psis, &spec.model()?, cfg.g)?;
        let sweep_path = out.join(format!("sweep_{name}.csv"));
        prov.write_csv(&sweep_path, &SWEEP_COLUMNS, records.iter().map(sweep_row))?;

        let unconstrained = select_optimal(&records, &Feasibility::Always)?;
        let mut constrained = Vec::new();
        let mut optimum_rows = vec![optimum_row("unconstrained", Some(&unconstrained))];
        for &psi in &psis {
            let feasible: Vec<&SweepRecord> = records
                .iter()
                .filter(|r| r.cell(psi).is_some_and(|c| c.feasible))
                .collect();
            prov.write_csv(
                &out.join(format!("feasible_{name}_{}.csv", psi.short_name())),
                &[
                    "tau0",
                    "tau1",
                    "accuracy",
                    "h",
                    "g",
                    "constraint_lhs",
                    "negatives0",
                    "negatives1",
                ],
                feasible.iter().map(|r| {
                    let c = r.cell(psi).expect("filtered on presence");
                    vec![
                        num(r.tau0),
                        num(r.tau1),
                        num(r.accuracy),
                        num(c.h),
                        num(c.g),
                        num(c.constraint_lhs),
                        c.negatives[0].to_string(),
                        c.negatives[1].to_string(),
                    ]
                }),
            )?;
            let best = match select_optimal(
                &records,
                &Feasibility::ConstraintLhsAtMost { psi, g: cfg.g },
            ) {
                Ok(r) => Some(r),
                Err(Error::Infeasible(_)) => None,
                Err(e) => return Err(e),
            };
            optimum_rows.push(optimum_row(
                &format!("feasible_{}", psi.short_name()),
                best.as_ref(),
            ));
            constrained.push((psi, best));
            plot_sweep(&sweep_path, out, &name, psi)?;
        }
        prov.write_csv(
            &out.join(format!("optimum_{name}.csv")),
            &[
                "selection",
                "status",
                "tau0",
                "tau1",
                "accuracy",
                "h_sr",
                "g_sr",
                "h_tpr",
                "g_tpr",
            ],
            optimum_rows,
        )?;
        costs.push(CostSweep {
            name,
            records,
            unconstrained,
            constrained,
        });
    }
    Ok(SweepReport {
        samples: data.len(),
        costs,
    })
}

fn optimum_row(selection: &str, r: Option<&SweepRecord>) -> Vec<String> {
    let Some(r) = r else {
        let mut row = vec![selection.to_string(), "infeasible".to_string()];
        row.resize(9, String::new());
        return row;
    };
    let [h_sr, g_sr, ..] = cell_columns(r.sr.as_ref());
    let [h_tpr, g_tpr, ..] = cell_columns(r.tpr.as_ref());
    vec![
        selection.into(),
        "ok".into(),
        num(r.tau0),
        num(r.tau1),
        num(r.accuracy),
        h_sr,
        g_sr,
        h_tpr,
        g_tpr,
    ]
}

fn plot_sweep(csv_path: &Path, out: &Path, name: &str, psi: SubPopCondition) -> Result<()> {
    let table = CsvTable::read(csv_path)?;
    let p = psi.short_name();
    let tau0 = table.numbers("tau0")?;
    let tau1 = table.numbers("tau1")?;
    let h = table.numbers(&format!("h_{p}"))?;
    let g = table.numbers(&format!("g_{p}"))?;
    let acc = table.numbers("accuracy")?;
    let feasible = table.strings(&format!("feasible_{p}"))?;
    for (x_name, xs, file) in [("H", &h, "h_vs_g"), ("accuracy", &acc, "accuracy_vs_g")] {
        let mut all = ScatterSeries {
            label: "all cells".into(),
            points: vec![],
            radius: 1.2,
        };
        let mut feas = ScatterSeries {
            label: "feasible".into(),
            points: vec![],
            radius: 1.6,
        };
        let mut shared = ScatterSeries {
            label: "shared threshold".into(),
            points: vec![],
            radius: 2.2,
        };
        for r in 0..table.rows.len() {
            let (Some(x), Some(y)) = (xs[r], g[r]) else {
                continue;
            };
            all.points.push((x, y));
            if feasible[r] == "true" {
                feas.points.push((x, y));
            }
            if tau0[r].is_some() && tau0[r] == tau1[r] {
                shared.points.push((x, y));
            }
        }
        let svg = scatter_plot(
            &format!("{name} cost, psi = {p}"),
            x_name,
            "G",
            &[all, feas, shared],
        );
        std::fs::write(out.join(format!("{name}_{p}_{file}.svg")), svg)?;
    }
    Ok(())
}
