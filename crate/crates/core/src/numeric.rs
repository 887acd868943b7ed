//! Small numeric helpers shared by the metric and bound computations.

/// Neumaier-compensated running sum.
///
/// The running state after `k` pushes is a pure function of the first `k`
/// values, so a prefix computed incrementally is bit-identical to a fresh sum
/// over the same prefix.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(compensated_sum(values.iter().copied()) / values.len() as f64)
    }
}

/// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
/// A single value has standard error 0.
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some((m, 0.0));
    }
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    let var = ss / (values.len() - 1) as f64;
    Some((m, (var / values.len() as f64).sqrt()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(vals), 1.0);
        let naive: f64 = vals.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn prefix_state_matches_fresh_sum() {
        let vals: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 1e3).collect();
        let mut running = CompensatedSum::new();
        for k in 0..vals.len() {
            assert_eq!(
                running.value().to_bits(),
                compensated_sum(vals[..k].iter().copied()).to_bits()
            );
            running.add(vals[k]);
        }
    }

    #[test]
    fn stderr_of_single_value_is_zero() {
        assert_eq!(mean_stderr(&[3.5]), Some((3.5, 0.0)));
        assert_eq!(mean_stderr(&[]), None);
        let (m, se) = mean_stderr(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
