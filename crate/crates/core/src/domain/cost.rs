use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{Group, Schema};
use crate::error::{Error, Result};

/// User-supplied d(x1, x2) for the one-dimensional setting.
#[derive(Clone)]
pub struct CustomCost(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl CustomCost {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomCost(..)")
    }
}

/// d(x1, x2) for one group; the paid cost is d · 1(x2 > x1).
#[derive(Debug, Clone)]
pub enum Cost1D {
    /// scale · (x2 − x1)
    Linear {
        scale: f64,
    },
    /// scale · (x2² − x1²)
    QuadraticSeparable {
        scale: f64,
    },
    Custom(CustomCost),
}

impl Cost1D {
    #[inline]
    pub fn d(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Cost1D::Linear { scale } => scale * (x2 - x1),
            Cost1D::QuadraticSeparable { scale } => scale * (x2 * x2 - x1 * x1),
            Cost1D::Custom(f) => (f.0)(x1, x2),
        }
    }
}

/// Per-group one-dimensional cost.
#[derive(Debug, Clone)]
pub struct CostModel1D {
    groups: [Cost1D; 2],
}

impl CostModel1D {
    pub fn new(group0: Cost1D, group1: Cost1D) -> Result<Self> {
        for c in [&group0, &group1] {
            match c {
                Cost1D::Linear { scale } | Cost1D::QuadraticSeparable { scale } => {
                    if !(*scale > 0.0) || !scale.is_finite() {
                        return Err(Error::Invalid(format!(
                            "cost scale must be positive, got {scale}"
                        )));
                    }
                }
                Cost1D::Custom(_) => {}
            }
        }
        Ok(Self {
            groups: [group0, group1],
        })
    }

    /// d(x1, x2) = x2 − x1 for both groups.
    pub fn linear() -> Self {
        Self::scaled_linear(1.0, 1.0).expect("unit scales are valid")
    }

    pub fn scaled_linear(a0: f64, a1: f64) -> Result<Self> {
        Self::new(Cost1D::Linear { scale: a0 }, Cost1D::Linear { scale: a1 })
    }

    /// d(x1, x2) = x2² − x1² for both groups.
    pub fn quadratic_separable() -> Self {
        Self::new(
            Cost1D::QuadraticSeparable { scale: 1.0 },
            Cost1D::QuadraticSeparable { scale: 1.0 },
        )
        .expect("unit scales are valid")
    }

    pub fn group(&self, group: Group) -> &Cost1D {
        &self.groups[group.index()]
    }

    #[inline]
    pub fn d(&self, group: Group, x1: f64, x2: f64) -> f64 {
        self.groups[group.index()].d(x1, x2)
    }

    /// c_z(x1, x2) = d_z(x1, x2) · 1(x2 > x1).
    #[inline]
    pub fn cost(&self, group: Group, x1: f64, x2: f64) -> f64 {
        if x2 > x1 {
            self.d(group, x1, x2)
        } else {
            0.0
        }
    }
}

/// Per-group linear cost vectors; `f64::INFINITY` marks a feature that cannot be moved.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCostMultiD {
    d: [Vec<f64>; 2],
}

impl LinearCostMultiD {
    pub fn new(d0: Vec<f64>, d1: Vec<f64>) -> Result<Self> {
        if d0.len() != d1.len() {
            return Err(Error::Schema(format!(
                "cost vectors differ in length ({} vs {})",
                d0.len(),
                d1.len()
            )));
        }
        for (z, d) in [&d0, &d1].into_iter().enumerate() {
            if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Invalid(format!(
                    "group {z} cost entry {i} must lie in (0, +inf], got {}",
                    d[i]
                )));
            }
            if d.iter().all(|v| v.is_infinite()) {
                return Err(Error::InfeasibleManipulation(format!(
                    "group {z} has no feature with finite cost"
                )));
            }
        }
        Ok(Self { d: [d0, d1] })
    }

    /// Group 0 pays `multiplier` times the base cost, group 1 the base cost.
    pub fn with_group0_multiplier(base: Vec<f64>, multiplier: f64) -> Result<Self> {
        let d0 = base.iter().map(|v| v * multiplier).collect();
        Self::new(d0, base)
    }

    pub fn dim(&self) -> usize {
        self.d[0].len()
    }

    pub fn vector(&self, group: Group) -> &[f64] {
        &self.d[group.index()]
    }

    /// d_zᵀ(x2 − x1) when x2 ≥ x1 componentwise, else 0.
    pub fn cost(&self, group: Group, x1: &[f64], x2: &[f64]) -> f64 {
        if x1.iter().zip(x2).any(|(a, b)| b < a) {
            return 0.0;
        }
        self.vector(group)
            .iter()
            .zip(x1.iter().zip(x2))
            .map(|(d, (a, b))| if b > a { d * (b - a) } else { 0.0 })
            .sum()
    }

    /// The schema's manipulable mask must mark exactly the finite-cost features.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.dim() != self.dim() {
            return Err(Error::Schema(format!(
                "cost vectors have {} entries, schema has {} features",
                self.dim(),
                schema.dim()
            )));
        }
        for g in Group::BOTH {
            for (i, (d, m)) in self.vector(g).iter().zip(&schema.manipulable).enumerate() {
                if d.is_finite() != *m {
                    return Err(Error::Schema(format!(
                        "feature `{}`: manipulable mask says {m} but group {} cost is {d}",
                        schema.feature_names[i],
                        g.index()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generalized squared distance (x' − x)ᵀB(x' − x), shared by both groups.
#[derive(Debug, Clone)]
pub struct QuadraticCostMultiD {
    b: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    condition_number: f64,
}

impl QuadraticCostMultiD {
    pub const MAX_CONDITION: f64 = 1e12;

    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        if !b.is_square() || b.nrows() == 0 {
            return Err(Error::Invalid(
                "cost matrix must be square and non-empty".into(),
            ));
        }
        let n = b.nrows();
        for i in 0..n {
            for j in 0..i {
                if (b[(i, j)] - b[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Invalid(format!(
                        "cost matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cholesky = Cholesky::new(b.clone())
            .ok_or_else(|| Error::Numerical("cost matrix is not positive definite".into()))?;
        let eig = SymmetricEigen::new(b.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
        Ok(Self {
            b,
            cholesky,
            condition_number,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(
                "cost matrix rows must all have length n".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// B⁻¹u, refusing ill-conditioned matrices.
    pub fn solve(&self, u: &[f64]) -> Result<DVector<f64>> {
        if self.condition_number > Self::MAX_CONDITION {
            return Err(Error::Numerical(format!(
                "cost matrix condition number {:.3e} exceeds {:.0e}",
                self.condition_number,
                Self::MAX_CONDITION
            )));
        }
        if u.len() != self.dim() {
            return Err(Error::Schema(format!(
                "weight vector has {} entries, cost matrix is {}x{}",
                u.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(self.cholesky.solve(&DVector::from_column_slice(u)))
    }

    /// (x' − x)ᵀB(x' − x) when x' ≥ x componentwise, else 0.
    pub fn cost(&self, x1: &[f64], x2: &[f64]) -> f64 {
        if x1.iter().zip(x2).any(|(a, b)| b < a) {
            return 0.0;
        }
        self.quadratic_form(x1, x2)
    }

    /// (x' − x)ᵀB(x' − x) without the componentwise guard.
    pub fn quadratic_form(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let delta = DVector::from_iterator(x1.len(), x1.iter().zip(x2).map(|(a, b)| b - a));
        delta.dot(&(&self.b * &delta))
    }
}

/// Any supported cost model.
#[derive(Debug, Clone)]
pub enum CostModel {
    OneD(CostModel1D),
    Linear(LinearCostMultiD),
    Quadratic(QuadraticCostMultiD),
}

impl From<CostModel1D> for CostModel {
    fn from(c: CostModel1D) -> Self {
        CostModel::OneD(c)
    }
}

impl From<LinearCostMultiD> for CostModel {
    fn from(c: LinearCostMultiD) -> Self {
        CostModel::Linear(c)
    }
}

impl From<QuadraticCostMultiD> for CostModel {
    fn from(c: QuadraticCostMultiD) -> Self {
        CostModel::Quadratic(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_cost_is_zero_on_the_diagonal_and_below() {
        let c = CostModel1D::scaled_linear(2.0, 1.0).unwrap();
        assert_eq!(c.cost(Group::Zero, 3.0, 3.0), 0.0);
        assert_eq!(c.cost(Group::Zero, 3.0, 1.0), 0.0);
        assert_eq!(c.cost(Group::Zero, 1.0, 3.0), 4.0);
        assert_eq!(c.cost(Group::One, 1.0, 3.0), 2.0);
        let q = CostModel1D::quadratic_separable();
        assert_eq!(q.cost(Group::One, 2.0, 3.0), 5.0);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(CostModel1D::scaled_linear(0.0, 1.0).is_err());
        assert!(CostModel1D::scaled_linear(1.0, -1.0).is_err());
    }

    #[test]
    fn linear_multi_validation() {
        assert!(LinearCostMultiD::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(LinearCostMultiD::new(vec![1.0], vec![1.0, 1.0]).is_err());
        let all_inf = LinearCostMultiD::new(vec![f64::INFINITY; 2], vec![1.0, 1.0]);
        assert!(matches!(all_inf, Err(Error::InfeasibleManipulation(_))));
        let c = LinearCostMultiD::with_group0_multiplier(vec![1.0, f64::INFINITY], 2.0).unwrap();
        assert_eq!(c.vector(Group::Zero)[0], 2.0);
        assert_eq!(c.cost(Group::Zero, &[0.0, 0.0], &[1.5, 0.0]), 3.0);
        assert_eq!(c.cost(Group::Zero, &[0.0, 0.0], &[1.5, -1.0]), 0.0);
    }

    #[test]
    fn schema_mask_must_agree_with_cost() {
        let c = LinearCostMultiD::new(vec![1.0, f64::INFINITY], vec![1.0, f64::INFINITY]).unwrap();
        let mut schema = Schema::anonymous(2);
        assert!(c.check_schema(&schema).is_err());
        schema.manipulable = vec![true, false];
        c.check_schema(&schema).unwrap();
    }

    #[test]
    fn quadratic_validation() {
        assert!(QuadraticCostMultiD::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(QuadraticCostMultiD::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        let q = QuadraticCostMultiD::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((q.condition_number() - 2.0).abs() < 1e-12);
        assert_eq!(q.cost(&[0.0, 0.0], &[1.0, 1.0]), 3.0);
        let x = q.solve(&[2.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ill_conditioned_matrix_refuses_to_solve() {
        let q = QuadraticCostMultiD::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-13]]).unwrap();
        assert!(matches!(q.solve(&[1.0, 1.0]), Err(Error::Numerical(_))));
    }
}
