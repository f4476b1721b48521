use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};

/// Owned vector of reals. Derefs to `[f64]` so slices and iterators work directly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|v| v * s).collect())
    }

    /// `self - other`
    pub fn sub(&self, other: &[f64]) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    /// `self + other`
    pub fn add(&self, other: &[f64]) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &[f64]) {
        axpy(alpha, x, &mut self.0);
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("DenseMatrix::from_row_major", n_rows * n_cols, data.len())?;
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            contract!(r.len() == n_cols, "ragged rows in DenseMatrix::from_rows");
            data.extend_from_slice(r);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    /// Builds an `n_rows x cols.len()` matrix from column vectors.
    pub fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> Self {
        let n_cols = cols.len();
        let mut m = Self::zeros(n_rows, n_cols);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n_rows, "column length mismatch");
            for (i, v) in c.iter().enumerate() {
                m.data[i * n_cols + j] = *v;
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.data[i * self.n_cols + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols).map(|j| self.col(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.data[j * self.n_rows + i] = self.data[i * self.n_cols + j];
            }
        }
        t
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&self, k: usize) -> Self {
        let k = k.min(self.n_cols);
        let mut m = Self::zeros(self.n_rows, k);
        for i in 0..self.n_rows {
            m.row_mut(i).copy_from_slice(&self.row(i)[..k]);
        }
        m
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("DenseMatrix::matmul", self.n_cols, other.n_rows)?;
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let orow = &mut out.data[i * other.n_cols..(i + 1) * other.n_cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a != 0.0 {
                    axpy(*a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim("DenseMatrix::matvec", self.n_cols, x.len())?;
        Ok((0..self.n_rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matvec_t(&self, y: &[f64]) -> Result<DenseVector> {
        check_dim("DenseMatrix::matvec_t", self.n_rows, y.len())?;
        let mut out = vec![0.0; self.n_cols];
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, self.row(i), &mut out);
        }
        Ok(out.into())
    }

    /// `selfᵀ self`
    pub fn gram(&self) -> DenseMatrix {
        let mut g = Self::zeros(self.n_cols, self.n_cols);
        for i in 0..self.n_rows {
            let r = self.row(i);
            for (a, ra) in r.iter().enumerate() {
                if *ra == 0.0 {
                    continue;
                }
                axpy(*ra, r, g.row_mut(a));
            }
        }
        g
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("DenseMatrix::sub", self.data.len(), other.data.len())?;
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        norm2(&self.data)
    }

    /// `‖selfᵀ self − I‖_max`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let mut err: f64 = 0.0;
        for i in 0..g.n_rows {
            for j in 0..g.n_cols {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}
