use super::rng::SeededRng;
use crate::domain::{Dataset, Group, LinearCostMultiD, Sample, Schema};
use crate::error::{Error, Result};

pub const ADULT_FEATURES: [&str; 9] = [
    "age",
    "education",
    "class_of_worker",
    "marital_status",
    "occupation",
    "birthplace",
    "relationship",
    "hours_per_week",
    "race",
];

/// Base manipulation costs of the strategic survey features; every other feature
/// is immutable. Group 0 pays `GROUP0_MULTIPLIER` times these.
pub const ADULT_BASE_COSTS: [(&str, f64); 3] = [
    ("class_of_worker", 100.0),
    ("occupation", 10.0),
    ("hours_per_week", 1.0),
];
pub const GROUP0_MULTIPLIER: f64 = 2.0;

/// Default strategic cost vectors for a schema containing the strategic features.
pub fn adult_default_costs(schema: &Schema) -> Result<LinearCostMultiD> {
    let base: Vec<f64> = schema
        .feature_names
        .iter()
        .map(|n| {
            ADULT_BASE_COSTS
                .iter()
                .find(|(k, _)| k == n)
                .map_or(f64::INFINITY, |(_, c)| *c)
        })
        .collect();
    if base.iter().all(|c| c.is_infinite()) {
        return Err(Error::Schema(
            "schema has none of class_of_worker, occupation, hours_per_week".into(),
        ));
    }
    LinearCostMultiD::with_group0_multiplier(base, GROUP0_MULTIPLIER)
}

fn adult_schema() -> Schema {
    let names: Vec<String> = ADULT_FEATURES.iter().map(|s| s.to_string()).collect();
    let manipulable = ADULT_FEATURES
        .iter()
        .map(|n| ADULT_BASE_COSTS.iter().any(|(k, _)| k == n))
        .collect();
    Schema::new(names, manipulable).expect("static schema")
}

/// Survey-like income data with nine features and a binary protected group.
///
/// Each person has a latent aptitude `a ~ N(0, 1)`. Group 0 members work fewer
/// hours and sit lower on the worker-class and occupation scales on average, so
/// they are both less often selected and further from any sensible boundary.
/// The label is Bernoulli of a logistic function of aptitude and several features.
pub fn generate_adult_like(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Invalid(format!("need at least 2 samples, got {n}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let group = if rng.bernoulli(0.48) {
            Group::Zero
        } else {
            Group::One
        };
        let g0 = if group == Group::Zero { 1.0 } else { 0.0 };
        let a = rng.standard_normal();
        let age = rng.normal(42.0, 13.0).clamp(17.0, 90.0);
        let education = rng.normal(10.0 + 2.0 * a, 2.5).round().clamp(1.0, 24.0);
        let class_of_worker = rng
            .normal(3.0 + 0.9 * a - 0.4 * g0, 1.5)
            .round()
            .clamp(1.0, 8.0);
        let marital = if rng.bernoulli(0.5 + 0.1 * a.tanh()) {
            1.0
        } else {
            0.0
        };
        let occupation = rng
            .normal(5.0 + 1.2 * a - 0.8 * g0, 2.0)
            .round()
            .clamp(1.0, 10.0);
        let birthplace = if rng.bernoulli(0.85) { 1.0 } else { 0.0 };
        let relationship = rng.below(6) as f64;
        let hours = rng.normal(41.0 + 3.0 * a - 5.0 * g0, 9.0).clamp(1.0, 99.0);
        let race = if rng.bernoulli(0.8) { 1.0 } else { 0.0 };
        let logit = -1.3
            + 0.9 * a
            + 0.03 * (age - 42.0)
            + 0.5 * marital
            + 0.04 * (hours - 40.0)
            + 0.15 * (class_of_worker - 3.0)
            + 0.15 * (occupation - 5.0);
        let label = rng.bernoulli(1.0 / (1.0 + libm::exp(-logit)));
        let features = vec![
            age,
            education,
            class_of_worker,
            marital,
            occupation,
            birthplace,
            relationship,
            hours,
            race,
        ];
        samples.push(Sample::new(features, label, group));
    }
    Dataset::new(adult_schema(), samples)
}
