use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::SynthConfig;
use super::output::{ensure_dir, num, opt, Provenance};
use super::svg::{line_plot, CsvTable, LineSeries};
use crate::datagen::{derive_seed, generate_synthetic_1d};
use crate::domain::{CostModel1D, SubPopCondition};
use crate::error::{Error, Result};
use crate::numeric::{mean, mean_stderr};
use crate::train::{linear_grid, select_optimal, sweep_thresholds, Feasibility, SweepRecord};

/// Statistics over the repetitions at one σ0 for one (ψ, constraint) pair.
/// Means are `None` when no repetition had an admissible threshold pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstrainedStats {
    pub n_feasible: usize,
    pub g_mean: Option<f64>,
    pub g_stderr: Option<f64>,
    pub abs_g_mean: Option<f64>,
    pub h_mean: Option<f64>,
    pub accuracy_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthRow {
    pub sigma0: f64,
    pub psi: SubPopCondition,
    /// Classifier trained under |H| ≤ eps.
    pub h_constrained: ConstrainedStats,
    /// Classifier trained under |G| ≤ gamma.
    pub g_constrained: ConstrainedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthReport {
    pub rows: Vec<SynthRow>,
}

struct Run {
    sigma_index: usize,
    rep: usize,
    seed: u64,
    /// Per requested ψ: (|H|-constrained, |G|-constrained) selections.
    picks: Vec<(Option<SweepRecord>, Option<SweepRecord>)>,
}

/// Seed of repetition `rep` at grid position `sigma_index`: two levels of
/// [`derive_seed`] below the master seed.
pub fn repetition_seed(master: u64, sigma_index: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(master, sigma_index as u64), rep as u64)
}

fn one_run(
    cfg: &SynthConfig,
    psis: &[SubPopCondition],
    sigma_index: usize,
    rep: usize,
) -> Result<Run> {
    let sigma0 = cfg.sigma0_grid[sigma_index];
    let seed = repetition_seed(cfg.seed, sigma_index, rep);
    let data = generate_synthetic_1d(cfg.mu0, cfg.mu1, sigma0, cfg.n_per_group, seed)?;
    let (lo, hi) = data
        .samples()
        .iter()
        .map(|s| s.features[0])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
    let grid = linear_grid(lo, hi, cfg.grid_points)?;
    let records = sweep_thresholds(&data, &grid, &grid, psis, &CostModel1D::linear(), 0.0)?;
    let pick = |f: Feasibility| match select_optimal(&records, &f) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let picks = psis
        .iter()
        .map(|&psi| {
            Ok((
                pick(Feasibility::AbsStatRateAtMost { psi, eps: cfg.eps })?,
                pick(Feasibility::AbsBurdenAtMost {
                    psi,
                    gamma: cfg.gamma,
                })?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(Run {
        sigma_index,
        rep,
        seed,
        picks,
    })
}

fn stats(picks: &[&SweepRecord], psi: SubPopCondition) -> ConstrainedStats {
    let cells: Vec<_> = picks
        .iter()
        .filter_map(|r| r.cell(psi).map(|c| (r.accuracy, *c)))
        .collect();
    let g: Vec<f64> = cells.iter().map(|c| c.1.g).collect();
    let abs_g: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let h: Vec<f64> = cells.iter().map(|c| c.1.h).collect();
    let acc: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let ms = mean_stderr(&g);
    ConstrainedStats {
        n_feasible: cells.len(),
        g_mean: ms.map(|m| m.0),
        g_stderr: ms.map(|m| m.1),
        abs_g_mean: mean(&abs_g),
        h_mean: mean(&h),
        accuracy_mean: mean(&acc),
    }
}

const SUMMARY_COLUMNS: [&str; 15] = [
    "sigma0",
    "psi",
    "repetitions",
    "h_constrained_feasible",
    "h_constrained_g_mean",
    "h_constrained_g_stderr",
    "h_constrained_abs_g_mean",
    "h_constrained_h_mean",
    "h_constrained_accuracy_mean",
    "g_constrained_feasible",
    "g_constrained_g_mean",
    "g_constrained_g_stderr",
    "g_constrained_abs_g_mean",
    "g_constrained_h_mean",
    "g_constrained_accuracy_mean",
];

/// Runs every (σ0, repetition) pair, writes `synth_summary.csv` (one row per σ0
/// and ψ), `synth_runs.csv` (one row per pair, ψ and constraint; infeasible
/// selections leave the threshold and metric cells empty) and `synth_g.svg`.
pub fn run_synth(cfg: &SynthConfig, out: &Path) -> Result<SynthReport> {
    cfg.validate()?;
    let psis = cfg.psi.conditions();
    let prov = Provenance::new(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.sigma0_grid.len())
        .flat_map(|i| (0..cfg.repetitions).map(move |r| (i, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, r)| one_run(cfg, &psis, i, r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, &sigma0) in cfg.sigma0_grid.iter().enumerate() {
        let at_sigma: Vec<&Run> = runs.iter().filter(|r| r.sigma_index == i).collect();
        for (k, &psi) in psis.iter().enumerate() {
            let h_picks: Vec<&SweepRecord> = at_sigma
                .iter()
                .filter_map(|r| r.picks[k].0.as_ref())
                .collect();
            let g_picks: Vec<&SweepRecord> = at_sigma
                .iter()
                .filter_map(|r| r.picks[k].1.as_ref())
                .collect();
            rows.push(SynthRow {
                sigma0,
                psi,
                h_constrained: stats(&h_picks, psi),
                g_constrained: stats(&g_picks, psi),
            });
        }
    }

    ensure_dir(out)?;
    let summary_path = out.join("synth_summary.csv");
    prov.write_csv(
        &summary_path,
        &SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            let mut v = vec![
                num(r.sigma0),
                r.psi.short_name().to_string(),
                cfg.repetitions.to_string(),
            ];
            for s in [&r.h_constrained, &r.g_constrained] {
                v.extend([
                    s.n_feasible.to_string(),
                    opt(s.g_mean),
                    opt(s.g_stderr),
                    opt(s.abs_g_mean),
                    opt(s.h_mean),
                    opt(s.accuracy_mean),
                ]);
            }
            v
        }),
    )?;

    let mut run_rows = Vec::new();
    for run in &runs {
        for (k, psi) in psis.iter().enumerate() {
            for (name, pick) in [
                ("h_constrained", &run.picks[k].0),
                ("g_constrained", &run.picks[k].1),
            ] {
                let cell = pick.and_then(|r| r.cell(*psi).copied());
                run_rows.push(vec![
                    num(cfg.sigma0_grid[run.sigma_index]),
                    run.rep.to_string(),
                    run.seed.to_string(),
                    psi.short_name().to_string(),
                    name.to_string(),
                    opt(pick.map(|r| r.tau0)),
                    opt(pick.map(|r| r.tau1)),
                    opt(pick.map(|r| r.accuracy)),
                    opt(cell.map(|c| c.h)),
                    opt(cell.map(|c| c.g)),
                ]);
            }
        }
    }
    prov.write_csv(
        &out.join("synth_runs.csv"),
        &[
            "sigma0",
            "repetition",
            "seed",
            "psi",
            "constraint",
            "tau0",
            "tau1",
            "accuracy",
            "h",
            "g",
        ],
        run_rows,
    )?;

    plot_summary(&summary_path, &out.join("synth_g.svg"), cfg)?;
    Ok(SynthReport { rows })
}

fn plot_summary(csv_path: &Path, svg_path: &Path, cfg: &SynthConfig) -> Result<()> {
    let table = CsvTable::read(csv_path)?;
    let sigma = table.numbers("sigma0")?;
    let psi = table.strings("psi")?;
    let mut series = Vec::new();
    for p in cfg.psi.conditions() {
        for (prefix, label) in [
            ("h_constrained", format!("|H| <= {}", cfg.eps)),
            ("g_constrained", format!("|G| <= {}", cfg.gamma)),
        ] {
            let mean = table.numbers(&format!("{prefix}_g_mean"))?;
            let err = table.numbers(&format!("{prefix}_g_stderr"))?;
            let points = (0..table.rows.len())
                .filter(|&r| psi[r] == p.short_name())
                .filter_map(|r| Some((sigma[r]?, mean[r]?, err[r])))
                .collect();
            series.push(LineSeries {
                label: format!("{label} ({})", p.short_name()),
                points,
            });
        }
    }
    let svg = line_plot(
        "Social burden gap vs group-0 spread",
        "sigma0",
        "mean G (± stderr)",
        &series,
    );
    std::fs::write(svg_path, svg)?;
    Ok(())
}
