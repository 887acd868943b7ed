use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::rng::SeededRng;
use crate::domain::{Dataset, Group, Sample, Schema};
use crate::error::{Error, Result};

const CDF_END_TOLERANCE: f64 = 1e-9;

/// Per-group score distributions and positive-label probabilities over a common
/// ascending list of integer scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTables {
    scores: Vec<i64>,
    cdf: [Vec<f64>; 2],
    p_positive: [Vec<f64>; 2],
    counts: [usize; 2],
}

#[derive(Deserialize)]
struct Row {
    score: i64,
    cdf_group0: f64,
    cdf_group1: f64,
    p_positive_group0: f64,
    p_positive_group1: f64,
}

impl CdfTables {
    pub fn new(
        scores: Vec<i64>,
        cdf: [Vec<f64>; 2],
        p_positive: [Vec<f64>; 2],
        counts: [usize; 2],
    ) -> Result<Self> {
        let n = scores.len();
        if n == 0 {
            return Err(Error::Invalid("CDF table has no scores".into()));
        }
        if cdf.iter().chain(&p_positive).any(|c| c.len() != n) {
            return Err(Error::Invalid("CDF table columns differ in length".into()));
        }
        if let Some(w) = scores.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(format!(
                "scores must be strictly ascending (row {})",
                w + 2
            )));
        }
        for z in 0..2 {
            let c = &cdf[z];
            if let Some(i) = c
                .iter()
                .position(|v| !(0.0..=1.0 + CDF_END_TOLERANCE).contains(v))
            {
                return Err(Error::Invalid(format!(
                    "group {z} CDF value {} at score {} is outside [0, 1]",
                    c[i], scores[i]
                )));
            }
            if let Some(i) = c.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::Invalid(format!(
                    "group {z} CDF decreases at score {}",
                    scores[i + 1]
                )));
            }
            if (c[n - 1] - 1.0).abs() > CDF_END_TOLERANCE {
                return Err(Error::Invalid(format!(
                    "group {z} CDF ends at {}, expected 1",
                    c[n - 1]
                )));
            }
            let p = &p_positive[z];
            if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid(format!(
                    "group {z} positive-label probability {} at score {} is outside [0, 1]",
                    p[i], scores[i]
                )));
            }
        }
        Ok(Self {
            scores,
            cdf,
            p_positive,
            counts,
        })
    }

    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    pub fn cdf(&self, group: Group) -> &[f64] {
        &self.cdf[group.index()]
    }

    pub fn p_positive(&self, group: Group) -> &[f64] {
        &self.p_positive[group.index()]
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn with_counts(mut self, counts: [usize; 2]) -> Self {
        self.counts = counts;
        self
    }

    /// Reads the table CSV (`score,cdf_group0,cdf_group1,p_positive_group0,p_positive_group1`);
    /// lines starting with `#` are ignored.
    pub fn from_reader<R: Read>(reader: R, counts: [usize; 2]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut scores, mut c0, mut c1, mut p0, mut p1) = (vec![], vec![], vec![], vec![], vec![]);
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let r = rec.map_err(|e| Error::Parse {
                row: i + 1,
                column: String::new(),
                message: e.to_string(),
            })?;
            scores.push(r.score);
            c0.push(r.cdf_group0);
            c1.push(r.cdf_group1);
            p0.push(r.p_positive_group0);
            p1.push(r.p_positive_group1);
        }
        Self::new(scores, [c0, c1], [p0, p1], counts)
    }

    pub fn from_path(path: &Path, counts: [usize; 2]) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?, counts)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "score",
            "cdf_group0",
            "cdf_group1",
            "p_positive_group0",
            "p_positive_group1",
        ])?;
        for i in 0..self.scores.len() {
            w.write_record([
                self.scores[i].to_string(),
                self.cdf[0][i].to_string(),
                self.cdf[1][i].to_string(),
                self.p_positive[0][i].to_string(),
                self.p_positive[1][i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Index of the score an inverse-CDF draw `u ∈ [0, 1)` lands on: the first
    /// score whose CDF exceeds `u`.
    fn inverse(&self, group: Group, u: f64) -> usize {
        let c = self.cdf(group);
        c.partition_point(|v| *v <= u).min(c.len() - 1)
    }
}

/// Draws `counts[z]` scores per group by inverse-CDF sampling, each followed by a
/// Bernoulli label from the (group, score) probability. Group 0 is drawn first.
pub fn sample_from_cdf_tables(tables: &CdfTables, seed: u64) -> Result<Dataset> {
    let mut rng = SeededRng::new(seed);
    let mut samples = Vec::with_capacity(tables.counts[0] + tables.counts[1]);
    for g in Group::BOTH {
        let p = tables.p_positive(g);
        for _ in 0..tables.counts[g.index()] {
            let k = tables.inverse(g, rng.uniform());
            let label = rng.bernoulli(p[k]);
            samples.push(Sample::new(vec![tables.scores[k] as f64], label, g));
        }
    }
    let schema = Schema::new(vec!["score".into()], vec![true])?;
    Dataset::new(schema, samples)
}

/// A synthetic stand-in for credit-score aggregate tables on scores 1..=100.
///
/// Group 0 (16 000 samples) has scores centred lower than group 1 (116 000
/// samples), and the positive-label probability is a logistic curve in the score
/// shared by both groups.
pub fn surrogate_fico_tables() -> CdfTables {
    let scores: Vec<i64> = (1..=100).collect();
    let density = |mean: f64, sd: f64| -> Vec<f64> {
        let w: Vec<f64> = scores
            .iter()
            .map(|&s| {
                let t = (s as f64 - mean) / sd;
                libm::exp(-0.5 * t * t)
            })
            .collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = w
            .iter()
            .map(|v| {
                acc += v / total;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        cdf
    };
    let repay: Vec<f64> = scores
        .iter()
        .map(|&s| 1.0 / (1.0 + (-(s as f64 - 45.0) / 8.0).exp()))
        .collect();
    CdfTables::new(
        scores.clone(),
        [density(38.0, 22.0), density(62.0, 20.0)],
        [repay.clone(), repay],
        [16_000, 116_000],
    )
    .expect("surrogate table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_tables(count: usize) -> CdfTables {
        let scores: Vec<i64> = (1..=100).collect();
        let cdf: Vec<f64> = (1..=100).map(|s| s as f64 / 100.0).collect();
        CdfTables::new(
            scores,
            [cdf.clone(), cdf],
            [vec![0.5; 100], vec![0.5; 100]],
            [count, count],
        )
        .unwrap()
    }

    #[test]
    fn declared_counts_are_respected() {
        let t = surrogate_fico_tables();
        assert_eq!(t.counts(), [16_000, 116_000]);
        let d = sample_from_cdf_tables(&t, 1).unwrap();
        assert_eq!(d.group_count(Group::Zero), 16_000);
        assert_eq!(d.group_count(Group::One), 116_000);
    }

    #[test]
    fn degenerate_cdf_puts_all_mass_on_one_score() {
        let scores: Vec<i64> = (1..=100).collect();
        let cdf: Vec<f64> = (1..=100).map(|s| if s >= 50 { 1.0 } else { 0.0 }).collect();
        let t = CdfTables::new(
            scores,
            [cdf.clone(), cdf],
            [vec![0.3; 100], vec![0.3; 100]],
            [500, 500],
        )
        .unwrap();
        let d = sample_from_cdf_tables(&t, 3).unwrap();
        assert!(d.samples().iter().all(|s| s.features[0] == 50.0));
    }

    #[test]
    fn uniform_histogram_within_one_percent() {
        let t = uniform_tables(1_000_000).with_counts([1_000_000, 0]);
        let d = sample_from_cdf_tables(&t, 8).unwrap();
        let mut hist = [0usize; 100];
        for s in d.samples() {
            hist[s.features[0] as usize - 1] += 1;
        }
        // total variation distance from the uniform histogram
        let tv: f64 = hist
            .iter()
            .map(|&h| (h as f64 / 1e6 - 0.01).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "{tv}");
    }

    #[test]
    fn empirical_cdf_within_band() {
        let t = surrogate_fico_tables().with_counts([100_000, 100_000]);
        let d = sample_from_cdf_tables(&t, 21).unwrap();
        for g in Group::BOTH {
            let xs: Vec<f64> = d
                .samples()
                .iter()
                .filter(|s| s.group == g)
                .map(|s| s.features[0])
                .collect();
            for (k, &score) in t.scores().iter().enumerate() {
                let emp =
                    xs.iter().filter(|&&x| x <= score as f64).count() as f64 / xs.len() as f64;
                assert!((emp - t.cdf(g)[k]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = surrogate_fico_tables().with_counts([1000, 1000]);
        assert_eq!(
            sample_from_cdf_tables(&t, 5).unwrap(),
            sample_from_cdf_tables(&t, 5).unwrap()
        );
    }

    #[test]
    fn validation_rejects_malformed_tables() {
        let scores = vec![1, 2, 3];
        let ok = vec![0.2, 0.5, 1.0];
        let p = vec![0.5; 3];
        assert!(CdfTables::new(
            scores.clone(),
            [vec![0.5, 0.2, 1.0], ok.clone()],
            [p.clone(), p.clone()],
            [1, 1]
        )
        .is_err());
        assert!(CdfTables::new(
            scores.clone(),
            [vec![0.2, 0.5, 0.9], ok.clone()],
            [p.clone(), p.clone()],
            [1, 1]
        )
        .is_err());
        assert!(CdfTables::new(
            scores.clone(),
            [ok.clone(), ok.clone()],
            [vec![0.5, 1.5, 0.5], p.clone()],
            [1, 1]
        )
        .is_err());
        assert!(CdfTables::new(
            vec![1, 1, 3],
            [ok.clone(), ok.clone()],
            [p.clone(), p.clone()],
            [1, 1]
        )
        .is_err());
        assert!(CdfTables::new(scores, [ok.clone(), ok], [p.clone(), p], [1, 1]).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let t = surrogate_fico_tables();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = CdfTables::from_reader(buf.as_slice(), t.counts()).unwrap();
        assert_eq!(back, t);
    }
}
