use curvlasso::linalg::{dense_svd, spectral_norm, sym_eigen, thin_qr, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use curvlasso::rng;
use curvlasso::{DenseMatrix, SparseMatrix};
use proptest::prelude::*;

fn gaussian_matrix(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut r = rng::seeded(seed);
    DenseMatrix::from_row_major(n, d, rng::gaussian_vec(&mut r, n * d)).unwrap()
}

fn random_sparse(n: usize, d: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut r = rng::seeded(seed);
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            (0..d)
                .filter_map(|j| (rng::uniform(&mut r) < density).then(|| (j, rng::gaussian(&mut r))))
                .collect()
        })
        .collect();
    SparseMatrix::from_sparse_rows(d, &rows).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn reconstruct(u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> DenseMatrix {
    let us = DenseMatrix::from_columns(
        u.n_rows(),
        &u.columns().iter().zip(s).map(|(c, si)| c.iter().map(|x| x * si).collect()).collect::<Vec<_>>(),
    );
    us.matmul(&v.transpose()).unwrap()
}

#[test]
fn matvec_agrees_with_densified_matrix_on_random_instances() {
    for seed in 0..100 {
        let n = 1 + (seed as usize * 7) % 23;
        let d = 1 + (seed as usize * 5) % 17;
        let a = random_sparse(n, d, 0.3, seed);
        let dense = a.to_dense();
        let mut r = rng::seeded(1000 + seed);
        let x = rng::gaussian_vec(&mut r, d);
        let y = rng::gaussian_vec(&mut r, n);
        let (s1, s2) = (a.matvec(&x).unwrap(), dense.matvec(&x).unwrap());
        let (t1, t2) = (a.matvec_t(&y).unwrap(), dense.matvec_t(&y).unwrap());
        let scale = 1.0 + s2.norm_inf().max(t2.norm_inf());
        assert!(max_abs_diff(s1.as_slice(), s2.as_slice()) <= 1e-12 * scale, "seed {seed}");
        assert!(max_abs_diff(t1.as_slice(), t2.as_slice()) <= 1e-12 * scale, "seed {seed}");
    }
}

#[test]
fn matvec_examples() {
    let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]).unwrap());
    assert_eq!(a.matvec(&[1.0, 1.0, 1.0]).unwrap().as_slice(), &[3.0, 3.0]);
    assert_eq!(a.matvec_t(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 3.0, 2.0]);
    assert!(a.matvec(&[1.0, 1.0]).is_err());
    let z = SparseMatrix::empty(0, 3);
    assert_eq!(z.matvec(&[1.0, 2.0, 3.0]).unwrap().len(), 0);
}

#[test]
fn transpose_is_an_involution() {
    let a = random_sparse(13, 9, 0.4, 3);
    let t = a.transpose();
    assert_eq!((t.n_rows(), t.n_cols()), (9, 13));
    assert_eq!(t.transpose(), a);
    assert_eq!(t.to_dense(), a.to_dense().transpose());
}

#[test]
fn thin_qr_examples() {
    let q = thin_qr(&DenseMatrix::identity(4));
    assert_eq!(q, DenseMatrix::identity(4));

    let mut cols = gaussian_matrix(10, 3, 1).columns();
    cols.push(cols[1].clone());
    let q = thin_qr(&DenseMatrix::from_columns(10, &cols));
    assert_eq!(q.n_cols(), 3);
    assert!(q.orthonormality_error() <= 1e-10);

    let m = gaussian_matrix(40, 8, 2);
    let q = thin_qr(&m);
    assert!(q.orthonormality_error() <= 1e-10);
    // (I − QQᵀ)M
    let proj = q.matmul(&q.transpose().matmul(&m).unwrap()).unwrap();
    let resid = m.sub(&proj).unwrap();
    assert!(resid.frobenius() <= 1e-8 * m.frobenius());
}

#[test]
fn dense_svd_examples() {
    let svd = dense_svd(&DenseMatrix::diag(&[3.0, 1.0]));
    assert_eq!(svd.s.as_slice(), &[3.0, 1.0]);
    for m in [&svd.u, &svd.v] {
        assert!(m.data().iter().all(|x| *x == 0.0 || x.abs() == 1.0));
    }

    let svd = dense_svd(&DenseMatrix::zeros(3, 2));
    assert_eq!(svd.s.as_slice(), &[0.0, 0.0]);

    let m = gaussian_matrix(12, 7, 3);
    let svd = dense_svd(&m);
    let rec = reconstruct(&svd.u, svd.s.as_slice(), &svd.v);
    assert!(rec.sub(&m).unwrap().max_abs() <= 1e-10 * m.max_abs());
    assert!(svd.u.orthonormality_error() <= 1e-9 && svd.v.orthonormality_error() <= 1e-9);
    assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
}

#[test]
fn dense_svd_wide_input() {
    let m = gaussian_matrix(4, 9, 4);
    let svd = dense_svd(&m);
    assert_eq!(svd.s.len(), 4);
    let rec = reconstruct(&svd.u, svd.s.as_slice(), &svd.v);
    assert!(rec.sub(&m).unwrap().max_abs() <= 1e-10 * m.max_abs());
}

#[test]
fn sym_eigen_matches_svd_of_gram() {
    let m = gaussian_matrix(15, 6, 5);
    let eig = sym_eigen(&m.gram());
    let svd = dense_svd(&m);
    for (l, s) in eig.values.iter().zip(svd.s.iter()) {
        assert!((l - s * s).abs() <= 1e-10 * svd.s[0] * svd.s[0]);
    }
}

#[test]
fn spectral_norm_examples() {
    let a = SparseMatrix::from_dense(&DenseMatrix::diag(&[5.0, 2.0]));
    let s = spectral_norm(&a, DEFAULT_TOL, DEFAULT_MAX_ITERS, 0).unwrap();
    assert!(s.converged && (s.value - 5.0).abs() <= 1e-8);

    // uvᵀ with ‖u‖ = 2, ‖v‖ = 3
    let u = [2.0 / 3f64.sqrt(); 3];
    let v = [0.0, 3.0 * 0.6, 3.0 * 0.8];
    let rows: Vec<Vec<f64>> = u.iter().map(|ui| v.iter().map(|vj| ui * vj).collect()).collect();
    let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&rows).unwrap());
    let s = spectral_norm(&a, DEFAULT_TOL, DEFAULT_MAX_ITERS, 1).unwrap();
    assert!((s.value - 6.0).abs() <= 1e-8, "{}", s.value);

    let m = gaussian_matrix(30, 20, 6);
    let s = spectral_norm(&m, DEFAULT_TOL, DEFAULT_MAX_ITERS, 2).unwrap();
    let top = dense_svd(&m).s[0];
    assert!((s.value - top).abs() <= 1e-8 * top, "{} vs {top}", s.value);
}

#[test]
fn spectral_norm_reports_non_convergence() {
    let m = gaussian_matrix(30, 20, 7);
    let s = spectral_norm(&m, 1e-15, 2, 0).unwrap();
    assert!(!s.converged);
    assert!(s.value > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_is_permutation_invariant(seed in 0u64..1000, n in 2usize..9, d in 2usize..9, shift in 1usize..8) {
        let m = gaussian_matrix(n, d, seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| {
            let r = m.row((i + shift) % n);
            (0..d).map(|j| r[(j + shift) % d]).collect()
        }).collect();
        let p = DenseMatrix::from_rows(&rows).unwrap();
        let (s1, s2) = (dense_svd(&m).s, dense_svd(&p).s);
        prop_assert!(max_abs_diff(s1.as_slice(), s2.as_slice()) <= 1e-10 * s1[0].max(1.0));
    }

    #[test]
    fn spectral_norm_is_bracketed(seed in 0u64..1000, n in 1usize..15, d in 1usize..15) {
        let a = random_sparse(n, d, 0.5, seed);
        prop_assume!(a.nnz() > 0);
        let s = spectral_norm(&a, DEFAULT_TOL, DEFAULT_MAX_ITERS, seed).unwrap().value;
        let max_col = a.column_norms().into_iter().fold(0.0, f64::max);
        prop_assert!(s <= a.frobenius_sq().sqrt() * (1.0 + 1e-12));
        prop_assert!(s >= max_col * (1.0 - 1e-8));
    }

    #[test]
    fn thin_qr_is_orthonormal(seed in 0u64..1000, n in 1usize..30, k in 1usize..10) {
        let q = thin_qr(&gaussian_matrix(n, k, seed));
        prop_assert!(q.n_cols() <= n.min(k));
        prop_assert!(q.orthonormality_error() <= 1e-10);
    }
}
