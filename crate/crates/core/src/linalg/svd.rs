use super::dense::{dot, norm2, DenseMatrix, DenseVector};
use super::qr::complete_basis;

/// Off-diagonal tolerance for the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 200;

/// Thin singular value decomposition `M = U diag(S) Vᵀ`, `S` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: DenseVector,
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD. Returns `k = min(rows, cols)` triplets.
pub fn dense_svd(m: &DenseMatrix) -> Svd {
    if m.n_rows() < m.n_cols() {
        let t = dense_svd(&m.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let rows = m.n_rows();
    let n = m.n_cols();
    let mut a = m.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = a.iter().map(|c| norm2(c)).enumerate().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let smax = order.first().map_or(0.0, |o| o.1);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut rank = 0;
    for (j, sigma) in &order {
        s.push(*sigma);
        v_cols.push(v[*j].clone());
        if *sigma > 1e-13 * smax && *sigma > 0.0 {
            u_cols.push(a[*j].iter().map(|x| x / sigma).collect::<Vec<_>>());
            rank += 1;
        }
    }
    // Columns for (numerically) zero singular values are arbitrary; complete to an orthonormal set.
    complete_basis(&mut u_cols, rows, n);
    debug_assert!(rank <= u_cols.len());
    Svd {
        u: DenseMatrix::from_columns(rows, &u_cols),
        s: s.into(),
        v: DenseMatrix::from_columns(n, &v_cols),
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues come back nonincreasing; `vectors` holds matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DenseVector,
    pub vectors: DenseMatrix,
}

pub fn sym_eigen(m: &DenseMatrix) -> SymEigen {
    let n = m.n_rows();
    assert_eq!(n, m.n_cols(), "sym_eigen needs a square matrix");
    let mut a = m.clone();
    // symmetrize against rounding in the caller
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut vecs = DenseMatrix::identity(n);
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= JACOBI_TOL * diag.sqrt() || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: DenseVector = order.iter().map(|&i| a[(i, i)]).collect();
    let cols: Vec<Vec<f64>> = order.iter().map(|&i| vecs.col(i)).collect();
    SymEigen {
        values,
        vectors: DenseMatrix::from_columns(n, &cols),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(svd: &Svd) -> DenseMatrix {
        let us = DenseMatrix::from_columns(
            svd.u.n_rows(),
            &svd
                .u
                .columns()
                .iter()
                .zip(svd.s.iter())
                .map(|(c, s)| c.iter().map(|x| x * s).collect())
                .collect::<Vec<_>>(),
        );
        us.matmul(&svd.v.transpose()).unwrap()
    }

    #[test]
    fn diagonal_case() {
        let m = DenseMatrix::diag(&[1.0, 3.0]);
        let svd = dense_svd(&m);
        assert_eq!(svd.s.as_slice(), &[3.0, 1.0]);
        assert!(reconstruct(&svd).sub(&m).unwrap().max_abs() < 1e-15);
        // signed permutations
        for x in svd.u.data().iter().chain(svd.v.data()) {
            assert!(x.abs() < 1e-15 || (x.abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_case() {
        let svd = dense_svd(&DenseMatrix::zeros(4, 3));
        assert_eq!(svd.s.as_slice(), &[0.0, 0.0, 0.0]);
        assert!(svd.u.orthonormality_error() < 1e-14);
        assert!(svd.v.orthonormality_error() < 1e-14);
    }

    #[test]
    fn wide_matrix() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let svd = dense_svd(&m);
        assert_eq!(svd.s.len(), 2);
        assert!(reconstruct(&svd).sub(&m).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn rank_deficient_u_is_orthonormal() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let svd = dense_svd(&m);
        assert!(svd.s[1] < 1e-14);
        assert!(svd.u.orthonormality_error() < 1e-12);
        assert!(reconstruct(&svd).sub(&m).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn sym_eigen_two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eigen(&m);
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = e.vectors.col(0);
        let mv = m.matvec(&v0).unwrap();
        for (a, b) in mv.iter().zip(&v0) {
            assert!((a - 3.0 * b).abs() < 1e-13);
        }
    }
}
