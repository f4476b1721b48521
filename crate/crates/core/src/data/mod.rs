//! Problem instances: LIBSVM loading, synthetic generation and column scaling.

mod libsvm;
mod synthetic;

pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_with_dim, serialize_libsvm, write_libsvm};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::linalg::{DenseVector, SparseMatrix};

/// Elastic-net instance
/// `min_x ‖Ax − b‖²/(2n) + (γ₂/2)‖x‖² + γ₁‖x‖₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub a: SparseMatrix,
    pub b: DenseVector,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Problem {
    pub fn new(a: SparseMatrix, b: DenseVector, gamma1: f64, gamma2: f64) -> Result<Self> {
        check_dim("Problem::new", a.n_rows(), b.len())?;
        contract!(gamma1 >= 0.0 && gamma1.is_finite(), "gamma1 must be >= 0, got {gamma1}");
        contract!(gamma2 > 0.0 && gamma2.is_finite(), "gamma2 must be > 0, got {gamma2}");
        Ok(Self {
            a,
            b,
            gamma1,
            gamma2,
        })
    }

    /// Same data, different regularization.
    pub fn with_regularization(&self, gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), gamma1, gamma2)
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn d(&self) -> usize {
        self.a.n_cols()
    }

    /// Ridge loss `f(x)`.
    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        let n = self.n() as f64;
        let mut loss = 0.0;
        for i in 0..self.n() {
            let r = self.a.row_dot(i, x) - self.b[i];
            loss += r * r;
        }
        let xx: f64 = x.iter().map(|v| v * v).sum();
        loss / (2.0 * n) + 0.5 * self.gamma2 * xx
    }

    pub fn regularizer(&self, x: &[f64]) -> f64 {
        self.gamma1 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Composite objective `F(x) = f(x) + γ₁‖x‖₁`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.regularizer(x)
    }

    /// `∇f(x) = Aᵀ(Ax − b)/n + γ₂x`
    pub fn full_gradient(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim("full_gradient", self.d(), x.len())?;
        let n = self.n() as f64;
        let mut g = vec![0.0; self.d()];
        for i in 0..self.n() {
            let r = self.a.row_dot(i, x) - self.b[i];
            if r != 0.0 {
                self.a.row_axpy(i, r / n, &mut g);
            }
        }
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += self.gamma2 * xi;
        }
        Ok(g.into())
    }

    /// Residual-free part of `∇f_i(x) − ∇f_i(y)` along `a_i`: returns `a_iᵀ(x − y)`.
    #[inline]
    pub(crate) fn row_diff_dot(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        let (cols, vals) = self.a.row(i);
        cols.iter().zip(vals).map(|(c, v)| v * (x[*c] - y[*c])).sum()
    }

    /// `(1/n) ‖A‖_F²`, the trace of the sample correlation matrix.
    pub fn correlation_trace(&self) -> f64 {
        self.a.frobenius_sq() / self.n() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColumnScaling {
    #[default]
    None,
    UnitNorm,
}

/// Rescales the columns of `a`. `UnitNorm` divides each nonzero column by its
/// 2-norm; all-zero columns are left alone.
pub fn column_scale(a: &SparseMatrix, mode: ColumnScaling) -> SparseMatrix {
    match mode {
        ColumnScaling::None => a.clone(),
        ColumnScaling::UnitNorm => {
            let factors: Vec<f64> = a
                .column_norms()
                .into_iter()
                .map(|nrm| if nrm > 0.0 { 1.0 / nrm } else { 1.0 })
                .collect();
            a.scale_columns(&factors).expect("factor length equals n_cols")
        }
    }
}
