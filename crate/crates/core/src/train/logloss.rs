use crate::domain::{Dataset, Group};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

pub const PROB_CLIP: f64 = 1e-12;

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_params(params: &[f64], dataset: &Dataset) -> Result<()> {
    if params.len() != dataset.dim() + 2 {
        return Err(Error::Schema(format!(
            "{} parameters for {} features; expected features + 2 group offsets",
            params.len(),
            dataset.dim()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::UndefinedMetric(
            "log-loss of an empty dataset".into(),
        ));
    }
    Ok(())
}

/// Margin uᵀx − v_z for parameters laid out as `[u..., v0, v1]`.
#[inline]
pub(crate) fn margin(params: &[f64], x: &[f64], group: Group) -> f64 {
    let d = x.len();
    crate::numeric::dot(&params[..d], x) - params[d + group.index()]
}

#[inline]
fn sample_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean logistic loss of `[u..., v0, v1]` on `dataset`.
pub fn log_loss(params: &[f64], dataset: &Dataset) -> Result<f64> {
    check_params(params, dataset)?;
    let mut acc = CompensatedSum::new();
    for s in dataset.samples() {
        acc.add(sample_loss(
            sigmoid(margin(params, &s.features, s.group)),
            s.label,
        ));
    }
    Ok(acc.value() / dataset.len() as f64)
}

/// Loss and its gradient. The gradient is that of the unclipped loss,
/// (σ(m) − y)·∂m/∂θ averaged over samples.
pub fn log_loss_with_gradient(params: &[f64], dataset: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_params(params, dataset)?;
    let d = dataset.dim();
    let n = dataset.len() as f64;
    let mut loss = CompensatedSum::new();
    let mut grad = vec![0.0; d + 2];
    for s in dataset.samples() {
        let p = sigmoid(margin(params, &s.features, s.group));
        loss.add(sample_loss(p, s.label));
        let r = p - if s.label { 1.0 } else { 0.0 };
        for (g, x) in grad[..d].iter_mut().zip(&s.features) {
            *g += r * x;
        }
        grad[d + s.group.index()] -= r;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss.value() / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Sample, Schema};

    #[test]
    fn zero_weights_give_ln2() {
        let d = Dataset::from_scalar(&[(1.0, 0, 0), (2.0, 1, 1), (-3.0, 1, 0)]).unwrap();
        assert!((log_loss(&[0.0, 0.0, 0.0], &d).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn single_sample_margin_one() {
        let d = Dataset::from_scalar(&[(1.0, 1, 0)]).unwrap();
        let l = log_loss(&[1.0, 0.0, 0.0], &d).unwrap();
        assert!((l - 0.31326168751822286).abs() < 1e-15, "{l}");
    }

    #[test]
    fn saturated_separator_near_zero() {
        let d =
            Dataset::from_scalar(&[(-1.0, 0, 0), (1.0, 1, 0), (-2.0, 0, 1), (3.0, 1, 1)]).unwrap();
        assert!(log_loss(&[1000.0, 0.0, 0.0], &d).unwrap() < 1e-11);
        // fully wrong predictions hit the clip instead of infinity
        let worst = log_loss(&[-1000.0, 0.0, 0.0], &d).unwrap();
        assert!((worst + PROB_CLIP.ln()).abs() < 1e-3, "{worst}");
    }

    #[test]
    fn wrong_parameter_count_rejected() {
        let d = Dataset::from_scalar(&[(1.0, 1, 0)]).unwrap();
        assert!(log_loss(&[1.0], &d).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let schema = Schema::anonymous(2);
        let samples = vec![
            Sample::new(vec![0.3, -1.2], true, Group::Zero),
            Sample::new(vec![1.5, 0.4], false, Group::One),
            Sample::new(vec![-0.7, 2.0], true, Group::One),
            Sample::new(vec![0.1, 0.1], false, Group::Zero),
        ];
        let d = Dataset::new(schema, samples).unwrap();
        let theta = [0.4, -0.3, 0.2, -0.5];
        let (_, g) = log_loss_with_gradient(&theta, &d).unwrap();
        for i in 0..4 {
            let h = 1e-6;
            let mut a = theta;
            let mut b = theta;
            a[i] += h;
            b[i] -= h;
            let fd = (log_loss(&a, &d).unwrap() - log_loss(&b, &d).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }
}
