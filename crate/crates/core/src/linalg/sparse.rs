use serde::{Deserialize, Serialize};

use super::dense::{DenseMatrix, DenseVector};
use crate::error::{check_dim, contract, Result};

/// Compressed sparse row matrix.
///
/// Invariants checked at construction: `row_ptr` starts at 0, is nondecreasing and
/// ends at `nnz`; column indices are strictly increasing within a row and `< n_cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_dim("SparseMatrix::new(row_ptr)", n_rows + 1, row_ptr.len())?;
        check_dim("SparseMatrix::new(values)", col_idx.len(), values.len())?;
        contract!(row_ptr[0] == 0, "row_ptr[0] must be 0");
        contract!(
            row_ptr[n_rows] == col_idx.len(),
            "row_ptr[n_rows] = {} but nnz = {}",
            row_ptr[n_rows],
            col_idx.len()
        );
        for i in 0..n_rows {
            contract!(row_ptr[i] <= row_ptr[i + 1], "row_ptr decreases at row {i}");
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in cols.windows(2) {
                contract!(w[0] < w[1], "column indices not strictly increasing in row {i}");
            }
            if let Some(&last) = cols.last() {
                contract!(last < n_cols, "column index {last} out of range in row {i}");
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from rows of `(column, value)` pairs; entries must already be sorted by column.
    pub fn from_sparse_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for &(c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(rows.len(), n_cols, row_ptr, col_idx, values)
    }

    /// Keeps every exactly-nonzero entry of a dense matrix.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.n_rows() {
            for (j, v) in m.row(i).iter().enumerate() {
                if *v != 0.0 {
                    col_idx.push(j);
                    values.push(*v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `Aᵀ` in CSR form (equivalently, `A` in CSC form).
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in order, so each transposed row comes out sorted
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                col_idx[k] = i;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum()
    }

    /// `y += alpha * a_i`
    #[inline]
    pub fn row_axpy(&self, i: usize, alpha: f64, y: &mut [f64]) {
        let (cols, vals) = self.row(i);
        for (c, v) in cols.iter().zip(vals) {
            y[*c] += alpha * v;
        }
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.n_cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sq[*c] += v * v;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Multiplies column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Self> {
        check_dim("SparseMatrix::scale_columns", self.n_cols, factors.len())?;
        let mut out = self.clone();
        for (c, v) in out.col_idx.iter().zip(out.values.iter_mut()) {
            *v *= factors[*c];
        }
        Ok(out)
    }

    /// Widens the matrix to `n_cols` columns (no-op if already that wide).
    pub fn with_n_cols(mut self, n_cols: usize) -> Result<Self> {
        contract!(
            n_cols >= self.n_cols,
            "cannot shrink matrix from {} to {} columns",
            self.n_cols,
            n_cols
        );
        self.n_cols = n_cols;
        Ok(self)
    }

    /// `Ax` with a sequential per-row sum.
    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim("SparseMatrix::matvec", self.n_cols, x.len())?;
        Ok((0..self.n_rows).map(|i| self.row_dot(i, x)).collect())
    }

    /// `Aᵀy`
    pub fn matvec_t(&self, y: &[f64]) -> Result<DenseVector> {
        check_dim("SparseMatrix::matvec_t", self.n_rows, y.len())?;
        let mut out = vec![0.0; self.n_cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                self.row_axpy(i, *yi, &mut out);
            }
        }
        Ok(out.into())
    }
}

/// Anything that can apply itself and its transpose to a vector.
pub trait LinearOperator {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<DenseVector>;
    fn apply_t(&self, y: &[f64]) -> Result<DenseVector>;
}

impl LinearOperator for SparseMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn apply(&self, x: &[f64]) -> Result<DenseVector> {
        self.matvec(x)
    }
    fn apply_t(&self, y: &[f64]) -> Result<DenseVector> {
        self.matvec_t(y)
    }
}

impl LinearOperator for DenseMatrix {
    fn n_rows(&self) -> usize {
        DenseMatrix::n_rows(self)
    }
    fn n_cols(&self) -> usize {
        DenseMatrix::n_cols(self)
    }
    fn apply(&self, x: &[f64]) -> Result<DenseVector> {
        self.matvec(x)
    }
    fn apply_t(&self, y: &[f64]) -> Result<DenseVector> {
        self.matvec_t(y)
    }
}

/// `scale * op` without copying the underlying matrix.
pub struct Scaled<'a, M: LinearOperator + ?Sized> {
    pub inner: &'a M,
    pub scale: f64,
}

impl<'a, M: LinearOperator + ?Sized> LinearOperator for Scaled<'a, M> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }
    fn apply(&self, x: &[f64]) -> Result<DenseVector> {
        Ok(self.inner.apply(x)?.scaled(self.scale))
    }
    fn apply_t(&self, y: &[f64]) -> Result<DenseVector> {
        Ok(self.inner.apply_t(y)?.scaled(self.scale))
    }
}
