//! Dense reference computations shared by the solver tests.
#![allow(dead_code)]

use curvlasso::data::{generate_synthetic, SyntheticSpec};
use curvlasso::hessian::{build_hessian, correlation_dense};
use curvlasso::linalg::dense_svd;
use curvlasso::{DenseMatrix, HessianModel, LowRankFactors, Problem};

pub fn synthetic(n: usize, d: usize, decay: f64, gamma1: f64, gamma2: f64, seed: u64) -> Problem {
    let spec = SyntheticSpec::power_law(n, d, 2.0, decay, seed)
        .with_regularization(gamma1, gamma2)
        .with_noise(0.1);
    generate_synthetic(&spec).unwrap()
}

/// Top-`r` factors of `A/√n` from the dense SVD.
pub fn exact_factors(p: &Problem, r: usize) -> LowRankFactors {
    let svd = dense_svd(&p.a.to_dense().scaled(1.0 / (p.n() as f64).sqrt()));
    LowRankFactors {
        u: svd.u.truncate_cols(r),
        sigma: svd.s.as_slice()[..r].to_vec().into(),
        v: svd.v.truncate_cols(r),
        rank_deficient: false,
    }
}

pub fn exact_h(p: &Problem, r: usize) -> HessianModel {
    build_hessian(&exact_factors(p, r), p.gamma2).unwrap()
}

/// `C + γ₂I`
pub fn ridge_hessian(p: &Problem) -> DenseMatrix {
    let mut c = correlation_dense(p);
    for j in 0..p.d() {
        c[(j, j)] += p.gamma2;
    }
    c
}

/// `Aᵀb/n`
pub fn atb(p: &Problem) -> Vec<f64> {
    let n = p.n() as f64;
    p.a.matvec_t(p.b.as_slice()).unwrap().iter().map(|v| v / n).collect()
}

/// Solves `Mx = rhs` for symmetric positive definite `M` by Cholesky.
pub fn spd_solve(m: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let d = rhs.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                assert!(s > 0.0, "matrix is not positive definite");
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= l[i * d + k] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= l[k * d + i] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    y
}

pub fn ridge_solution(p: &Problem) -> Vec<f64> {
    spd_solve(&ridge_hessian(p), &atb(p))
}

pub fn matvec(m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.n_rows()).map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// `argmin_z ½zᵀQz − cᵀz + γ₁‖z‖₁` by proximal gradient with step
/// `1/‖Q‖_∞` (a Gershgorin bound on `λ_max`), run until iterates stop moving.
pub fn quad_l1_min(q: &DenseMatrix, c: &[f64], gamma1: f64) -> Vec<f64> {
    let d = c.len();
    let bound = (0..d).map(|i| q.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / bound;
    let mut z = vec![0.0; d];
    for _ in 0..2_000_000 {
        let g = matvec(q, &z);
        let next: Vec<f64> = (0..d)
            .map(|j| {
                let w = z[j] - step * (g[j] - c[j]);
                w.signum() * (w.abs() - step * gamma1).max(0.0)
            })
            .collect();
        let moved = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next;
        if moved <= 1e-16 * (1.0 + z.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    z
}

/// Elastic-net minimizer: `Q = C + γ₂I`, `c = Aᵀb/n`.
pub fn elastic_net_solution(p: &Problem) -> Vec<f64> {
    quad_l1_min(&ridge_hessian(p), &atb(p), p.gamma1)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}
