//! Dataset generation, ingestion, normalization and splitting.

mod adult;
mod io;
pub mod rng;
mod tables;

pub use adult::{
    adult_default_costs, generate_adult_like, ADULT_BASE_COSTS, ADULT_FEATURES, GROUP0_MULTIPLIER,
};
pub use io::{load_csv_dataset, read_csv_dataset, write_csv_dataset, write_csv_dataset_to};
pub use rng::{derive_seed, SeededRng, RNG_NAME};
pub use tables::{sample_from_cdf_tables, surrogate_fico_tables, CdfTables};

use crate::domain::{Dataset, Group, Normalization, Sample, Schema};
use crate::error::{Error, Result};

/// Two Gaussian groups on one feature with label probability tied to position
/// within the group's realized range.
///
/// Group 0 draws from N(mu0, sigma0) and group 1 from N(mu1, sigma0 / 2). Each
/// group draws all its features first, then its labels, group 0 before group 1.
/// The label of x is Bernoulli((x + min) / (max + min)) with min and max taken over
/// that group's draws, clamped to [0, 1]; when max + min is 0 the probability is 1/2.
pub fn generate_synthetic_1d(
    mu0: f64,
    mu1: f64,
    sigma0: f64,
    n_per_group: usize,
    seed: u64,
) -> Result<Dataset> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::Invalid(format!(
            "sigma0 must be positive, got {sigma0}"
        )));
    }
    if n_per_group < 2 {
        return Err(Error::Invalid(format!(
            "n_per_group must be at least 2, got {n_per_group}"
        )));
    }
    if !mu0.is_finite() || !mu1.is_finite() {
        return Err(Error::Invalid("means must be finite".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut samples = Vec::with_capacity(2 * n_per_group);
    for (group, mu, sigma) in [(Group::Zero, mu0, sigma0), (Group::One, mu1, sigma0 / 2.0)] {
        let xs: Vec<f64> = (0..n_per_group).map(|_| rng.normal(mu, sigma)).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for x in xs {
            let p = synthetic_label_probability(x, lo, hi);
            samples.push(Sample::new(vec![x], rng.bernoulli(p), group));
        }
    }
    Dataset::new(Schema::anonymous(1), samples)
}

pub fn synthetic_label_probability(x: f64, min: f64, max: f64) -> f64 {
    let denom = max + min;
    if denom == 0.0 {
        return 0.5;
    }
    ((x + min) / denom).clamp(0.0, 1.0)
}

/// Fits per-feature mean and population standard deviation on `train` and applies
/// `(x - mean) / std` to `train` and every dataset in `others`.
pub fn normalize_fit_apply(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, Normalization)> {
    if train.is_empty() {
        return Err(Error::Invalid(
            "cannot fit normalization on an empty dataset".into(),
        ));
    }
    let dim = train.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for j in 0..dim {
        let m = crate::numeric::compensated_sum(train.samples().iter().map(|s| s.features[j])) / n;
        let var = crate::numeric::compensated_sum(
            train.samples().iter().map(|s| (s.features[j] - m).powi(2)),
        ) / n;
        mean[j] = m;
        std[j] = var.sqrt();
        if !(std[j] > 0.0) {
            return Err(Error::Invalid(format!(
                "feature `{}` has zero variance in the training partition",
                train.schema().feature_names[j]
            )));
        }
    }
    let norm = Normalization { mean, std };
    let train_n = apply_normalization(train, &norm)?;
    let others_n = others
        .iter()
        .map(|d| apply_normalization(d, &norm))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_n, others_n, norm))
}

/// Applies previously fitted statistics; the returned schema records them.
pub fn apply_normalization(dataset: &Dataset, norm: &Normalization) -> Result<Dataset> {
    let schema = dataset.schema().clone().with_normalization(norm.clone())?;
    let samples = dataset
        .samples()
        .iter()
        .map(|s| {
            let features = s
                .features
                .iter()
                .zip(norm.mean.iter().zip(&norm.std))
                .map(|(x, (m, sd))| (x - m) / sd)
                .collect();
            Sample::new(features, s.label, s.group)
        })
        .collect();
    Dataset::new(schema, samples)
}

/// Uniform random partition: `floor(n * test_fraction)` samples go to the test
/// side. Both partitions keep the original sample order.
pub fn train_test_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Invalid(format!(
            "test fraction must lie in [0, 1], got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let n_test = (n as f64 * test_fraction).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((dataset.select(&train_idx), dataset.select(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SubPopCondition;
    use crate::metrics::feature_bias_check;

    #[test]
    fn synthetic_sizes_and_determinism() {
        let a = generate_synthetic_1d(5.0, 7.0, 2.0, 500, 9).unwrap();
        let b = generate_synthetic_1d(5.0, 7.0, 2.0, 500, 9).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a.group_count(Group::Zero), 500);
        assert_eq!(a, b);
        let c = generate_synthetic_1d(5.0, 7.0, 2.0, 500, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_rejects_bad_parameters() {
        assert!(generate_synthetic_1d(0.0, 1.0, 0.0, 10, 0).is_err());
        assert!(generate_synthetic_1d(0.0, 1.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn separated_means_are_feature_biased_most_of_the_time() {
        let biased = (0..100)
            .filter(|&seed| {
                let d = generate_synthetic_1d(3.0, 8.0, 0.5, 500, seed).unwrap();
                feature_bias_check(&d, SubPopCondition::All)
                    .unwrap()
                    .biased_against_0
            })
            .count();
        assert!(biased >= 95, "{biased}/100");
    }

    #[test]
    fn synthetic_label_frequency_matches_formula_by_decile() {
        let d = generate_synthetic_1d(10.0, 12.0, 2.0, 50_000, 5).unwrap();
        for g in Group::BOTH {
            let mut pts: Vec<(f64, bool)> = d
                .samples()
                .iter()
                .filter(|s| s.group == g)
                .map(|s| (s.features[0], s.label))
                .collect();
            let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for bin in pts.chunks(pts.len() / 10) {
                let expected = bin
                    .iter()
                    .map(|p| synthetic_label_probability(p.0, lo, hi))
                    .sum::<f64>()
                    / bin.len() as f64;
                let observed = bin.iter().filter(|p| p.1).count() as f64 / bin.len() as f64;
                assert!(
                    (expected - observed).abs() < 0.02,
                    "{g:?}: {expected} vs {observed}"
                );
            }
        }
    }

    #[test]
    fn label_probability_clamps() {
        assert_eq!(synthetic_label_probability(-10.0, 1.0, 3.0), 0.0);
        assert_eq!(synthetic_label_probability(3.0, 1.0, 3.0), 1.0);
        assert_eq!(synthetic_label_probability(2.0, 1.0, 3.0), 0.75);
        assert_eq!(synthetic_label_probability(0.3, -1.0, 1.0), 0.5);
    }

    fn grid_dataset() -> Dataset {
        let rows: Vec<(f64, u8, u8)> = (0..10)
            .map(|i| (i as f64 * 1.5, (i % 2) as u8, (i / 5) as u8))
            .collect();
        Dataset::from_scalar(&rows).unwrap()
    }

    #[test]
    fn split_sizes_union_and_determinism() {
        let d = grid_dataset();
        let (train, test) = train_test_split(&d, 0.2, 4).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train2, test2) = train_test_split(&d, 0.2, 4).unwrap();
        assert_eq!((&train, &test), (&train2, &test2));
        let mut all: Vec<f64> = train
            .samples()
            .iter()
            .chain(test.samples())
            .map(|s| s.features[0])
            .collect();
        all.sort_by(f64::total_cmp);
        let mut orig: Vec<f64> = d.samples().iter().map(|s| s.features[0]).collect();
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }

    #[test]
    fn own_stats_give_zero_mean_unit_std() {
        let d = generate_synthetic_1d(4.0, 9.0, 3.0, 200, 1).unwrap();
        let (n, _, _) = normalize_fit_apply(&d, &[]).unwrap();
        let xs: Vec<f64> = n.samples().iter().map(|s| s.features[0]).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(m.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
        assert!(n.schema().normalization.is_some());
    }

    #[test]
    fn shifted_copy_normalizes_with_train_stats() {
        let d = grid_dataset();
        let shifted_samples: Vec<Sample> = d
            .samples()
            .iter()
            .map(|s| Sample::new(vec![s.features[0] + 3.0], s.label, s.group))
            .collect();
        let shifted = Dataset::new(d.schema().clone(), shifted_samples).unwrap();
        let (train_n, others, norm) = normalize_fit_apply(&d, &[&shifted]).unwrap();
        for (a, b) in train_n.samples().iter().zip(others[0].samples()) {
            assert!((b.features[0] - a.features[0] - 3.0 / norm.std[0]).abs() < 1e-12);
            assert_eq!((a.label, a.group), (b.label, b.group));
        }
    }

    #[test]
    fn stats_round_trip_reapply_bit_identical() {
        let d = generate_synthetic_1d(4.0, 9.0, 3.0, 100, 2).unwrap();
        let (n, _, norm) = normalize_fit_apply(&d, &[]).unwrap();
        let json = serde_json::to_string(&norm).unwrap();
        let back: Normalization = serde_json::from_str(&json).unwrap();
        assert_eq!(apply_normalization(&d, &back).unwrap(), n);
    }

    #[test]
    fn zero_variance_names_feature() {
        let d = Dataset::from_scalar(&[(1.0, 0, 0), (1.0, 1, 1)]).unwrap();
        let err = normalize_fit_apply(&d, &[]).unwrap_err().to_string();
        assert!(err.contains("`x`"), "{err}");
    }
}
