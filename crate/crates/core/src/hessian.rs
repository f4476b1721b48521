//! The structured approximate Hessian
//! `H = V(Σ² + γ₂I)Vᵀ + (σ_r² + γ₂)(I − VVᵀ)` of the ridge loss, the
//! smoothness constants measured in its norm, and conditioning diagnostics.

use serde::{Deserialize, Serialize};

use crate::data::Problem;
use crate::error::{check_dim, contract, Error, Result};
use crate::linalg::{sym_eigen, DenseMatrix, DenseVector};
use crate::rng::{self, Rng};
use crate::sketch::LowRankFactors;

/// Largest dimension for which dense eigen-solves are attempted.
pub const DENSE_EIGEN_MAX_DIM: usize = 2000;

/// Quadratic forms this negative are treated as rounding noise and clamped.
const NEG_CLAMP: f64 = -1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianModel {
    /// `d × r`, orthonormal columns.
    v: DenseMatrix,
    sig2: DenseVector,
    gamma2: f64,
    tail: f64,
    /// `1/(σ_k² + γ₂) − 1/tail`, cached for inverse applications.
    inv_weights: Vec<f64>,
}

impl HessianModel {
    pub fn new(v: DenseMatrix, sig2: DenseVector, gamma2: f64) -> Result<Self> {
        contract!(gamma2 > 0.0 && gamma2.is_finite(), "gamma2 must be > 0, got {gamma2}");
        check_dim("HessianModel::new", v.n_cols(), sig2.len())?;
        contract!(
            sig2.iter().all(|s| *s >= 0.0 && s.is_finite()),
            "squared singular values must be finite and nonnegative"
        );
        contract!(
            sig2.windows(2).all(|w| w[0] >= w[1]),
            "squared singular values must be nonincreasing"
        );
        let tail = sig2.last().copied().unwrap_or(0.0) + gamma2;
        let inv_weights = sig2.iter().map(|s| 1.0 / (s + gamma2) - 1.0 / tail).collect();
        Ok(Self {
            v,
            sig2,
            gamma2,
            tail,
            inv_weights,
        })
    }

    /// `H = c·I` in dimension `d` (rank zero, `γ₂ = c`).
    pub fn isotropic(d: usize, c: f64) -> Result<Self> {
        Self::new(DenseMatrix::zeros(d, 0), DenseVector::zeros(0), c)
    }

    pub fn d(&self) -> usize {
        self.v.n_rows()
    }

    pub fn rank(&self) -> usize {
        self.sig2.len()
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn sig2(&self) -> &DenseVector {
        &self.sig2
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// Eigenvalue on the orthogonal complement of `col(V)`.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `λ₁(H) = σ₁² + γ₂`.
    pub fn lambda_max(&self) -> f64 {
        self.sig2.first().map_or(self.tail, |s| s + self.gamma2)
    }

    pub fn lambda_min(&self) -> f64 {
        self.tail
    }

    /// `κ_sub = λ₁(H)/λ_min(H)`.
    pub fn kappa_sub(&self) -> f64 {
        self.lambda_max() / self.tail
    }

    fn apply_weighted(&self, x: &[f64], scale: f64, weights: impl Iterator<Item = f64>) -> Result<DenseVector> {
        check_dim("HessianModel::apply", self.d(), x.len())?;
        let mut c = self.v.matvec_t(x)?;
        c.iter_mut().zip(weights).for_each(|(ci, w)| *ci *= w);
        let mut out = DenseVector::from_vec(x.iter().map(|xi| scale * xi).collect());
        if self.rank() > 0 {
            out.axpy(1.0, &self.v.matvec(&c)?);
        }
        Ok(out)
    }

    /// `Hx` in `O(rd)`.
    pub fn apply_h(&self, x: &[f64]) -> Result<DenseVector> {
        let tail = self.tail;
        let g = self.gamma2;
        self.apply_weighted(x, tail, self.sig2.iter().map(move |s| s + g - tail))
    }

    /// `H⁻¹x` in `O(rd)`.
    pub fn apply_h_inv(&self, x: &[f64]) -> Result<DenseVector> {
        self.apply_weighted(x, 1.0 / self.tail, self.inv_weights.iter().copied())
    }

    /// `‖x‖_H`
    pub fn h_norm(&self, x: &[f64]) -> Result<f64> {
        clamped_sqrt(self.apply_h(x)?.dot(x))
    }

    /// `‖x‖_{H⁻¹}`
    pub fn h_inv_norm(&self, x: &[f64]) -> Result<f64> {
        clamped_sqrt(self.apply_h_inv(x)?.dot(x))
    }

    /// `out = Hx` without allocating; `coef` is scratch of length `r`.
    pub(crate) fn apply_h_into(&self, x: &[f64], out: &mut [f64], coef: &mut [f64]) {
        let r = self.rank();
        coef.iter_mut().for_each(|c| *c = 0.0);
        for (j, xj) in x.iter().enumerate() {
            for (ck, vk) in coef.iter_mut().zip(self.v.row(j)) {
                *ck += vk * xj;
            }
        }
        for (ck, s) in coef.iter_mut().zip(self.sig2.iter()) {
            *ck *= s + self.gamma2 - self.tail;
        }
        for (j, (oj, xj)) in out.iter_mut().zip(x).enumerate() {
            let row = &self.v.row(j)[..r];
            *oj = self.tail * xj + row.iter().zip(coef.iter()).map(|(v, c)| v * c).sum::<f64>();
        }
    }

    /// `aᵀH⁻¹a` for a sparse vector, touching only the rows of `V` it needs.
    pub fn inv_quad_sparse(&self, cols: &[usize], vals: &[f64]) -> f64 {
        let r = self.rank();
        let mut c = vec![0.0; r];
        let mut sq = 0.0;
        for (&j, &a) in cols.iter().zip(vals) {
            sq += a * a;
            for (ck, vk) in c.iter_mut().zip(self.v.row(j)) {
                *ck += a * vk;
            }
        }
        let low: f64 = c.iter().zip(&self.inv_weights).map(|(ck, w)| w * ck * ck).sum();
        (sq / self.tail + low).max(0.0)
    }

    /// Materialized `H` (tests and small problems only).
    pub fn to_dense(&self) -> DenseMatrix {
        let d = self.d();
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                self.apply_h(&e).expect("dimension matches").into_vec()
            })
            .collect();
        DenseMatrix::from_columns(d, &cols)
    }

    /// Materialized `H^{-1/2}`.
    fn inv_sqrt_dense(&self) -> DenseMatrix {
        let d = self.d();
        let base = 1.0 / self.tail.sqrt();
        let weights: Vec<f64> = self.sig2.iter().map(|s| 1.0 / (s + self.gamma2).sqrt() - base).collect();
        let mut m = DenseMatrix::identity(d).scaled(base);
        for i in 0..d {
            let vi = self.v.row(i).to_vec();
            for j in 0..d {
                let vj = self.v.row(j);
                let s: f64 = vi.iter().zip(vj).zip(&weights).map(|((a, b), w)| a * b * w).sum();
                m[(i, j)] += s;
            }
        }
        m
    }
}

fn clamped_sqrt(q: f64) -> Result<f64> {
    if q < NEG_CLAMP {
        return Err(Error::Numerical(format!("negative quadratic form {q:e}; H is not positive definite")));
    }
    Ok(q.max(0.0).sqrt())
}

/// Builds `H` from a sketch of `A/√n`.
pub fn build_hessian(factors: &LowRankFactors, gamma2: f64) -> Result<HessianModel> {
    let sig2 = factors.sigma.iter().map(|s| s * s).collect();
    HessianModel::new(factors.v.clone(), sig2, gamma2)
}

/// How `μ̂`, the strong-convexity constant of `f` in the `H`-norm, is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// `Exact` when `d ≤ 2000`, otherwise `Bound`.
    #[default]
    Auto,
    /// `λ_min(H^{-1/2}(C + γ₂I)H^{-1/2})` by dense eigen-solve.
    Exact,
    /// The guaranteed lower bound `γ₂ / (19(σ_r² + γ₂))`.
    Bound,
    Override(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    /// Surrogate constants `ℓ_i = a_iᵀH⁻¹a_i + 1`.
    pub ell: DenseVector,
    pub l_avg: f64,
    pub l_max: f64,
    pub mu_hat: f64,
    /// Cumulative sampling weights; `cum_p[i] = Σ_{j≤i} ℓ_j / (n L_avg)`, last entry exactly 1.
    pub cum_p: Vec<f64>,
}

impl SmoothnessProfile {
    pub fn n(&self) -> usize {
        self.ell.len()
    }

    /// `p_i = ℓ_i / (n L_avg)`
    pub fn p(&self, i: usize) -> f64 {
        self.ell[i] / (self.n() as f64 * self.l_avg)
    }

    /// One index drawn from `p`.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng::uniform(rng);
        self.cum_p.partition_point(|c| *c <= u).min(self.n() - 1)
    }
}

pub fn smoothness_profile(problem: &Problem, h: &HessianModel, mu_mode: MuMode) -> Result<SmoothnessProfile> {
    check_dim("smoothness_profile", problem.d(), h.d())?;
    let n = problem.n();
    contract!(n > 0, "problem has no samples");
    let ell: Vec<f64> = (0..n)
        .map(|i| {
            let (cols, vals) = problem.a.row(i);
            h.inv_quad_sparse(cols, vals) + 1.0
        })
        .collect();
    let total: f64 = ell.iter().sum();
    let l_avg = total / n as f64;
    let l_max = ell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum_p = Vec::with_capacity(n);
    let mut acc = 0.0;
    for l in &ell {
        acc += l;
        cum_p.push(acc / total);
    }
    *cum_p.last_mut().expect("n > 0") = 1.0;

    let mu_hat = match mu_mode {
        MuMode::Override(mu) => {
            contract!(mu > 0.0 && mu.is_finite(), "mu override must be > 0, got {mu}");
            mu
        }
        MuMode::Bound => mu_bound(h),
        MuMode::Exact => lemma1_spectral_check(problem, h)?.1,
        MuMode::Auto if problem.d() <= DENSE_EIGEN_MAX_DIM => lemma1_spectral_check(problem, h)?.1,
        MuMode::Auto => mu_bound(h),
    };
    Ok(SmoothnessProfile {
        ell: ell.into(),
        l_avg,
        l_max,
        mu_hat,
        cum_p,
    })
}

/// `γ₂ / (19(σ_r² + γ₂))`
pub fn mu_bound(h: &HessianModel) -> f64 {
    h.gamma2 / (19.0 * h.tail)
}

/// `C = AᵀA/n` as a dense matrix, accumulated from sparse rows.
pub fn correlation_dense(problem: &Problem) -> DenseMatrix {
    let d = problem.d();
    let inv_n = 1.0 / problem.n() as f64;
    let mut c = DenseMatrix::zeros(d, d);
    for i in 0..problem.n() {
        let (cols, vals) = problem.a.row(i);
        for (&j, &aj) in cols.iter().zip(vals) {
            let row = c.row_mut(j);
            for (&k, &ak) in cols.iter().zip(vals) {
                row[k] += inv_n * aj * ak;
            }
        }
    }
    c
}

/// Extreme eigenvalues `(λ_max, λ_min)` of `H^{-1/2}(C + γ₂I)H^{-1/2}`.
pub fn lemma1_spectral_check(problem: &Problem, h: &HessianModel) -> Result<(f64, f64)> {
    let d = problem.d();
    check_dim("lemma1_spectral_check", d, h.d())?;
    contract!(
        d <= DENSE_EIGEN_MAX_DIM,
        "dense eigen-solve needs d <= {DENSE_EIGEN_MAX_DIM}, got {d}"
    );
    let mut c = correlation_dense(problem);
    for j in 0..d {
        c[(j, j)] += problem.gamma2;
    }
    let s = h.inv_sqrt_dense();
    let mut m = s.matmul(&c)?.matmul(&s)?;
    // symmetrize away rounding asymmetry
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let eig = sym_eigen(&m);
    let lam_max = eig.values.first().copied().unwrap_or(0.0);
    let lam_min = eig.values.last().copied().unwrap_or(0.0);
    Ok((lam_max, lam_min))
}

/// `d_λ = Σ λ_i/(λ_i + λ)`; at `λ = 0` the count of positive `λ_i`.
pub fn effective_dimension(lambdas: &[f64], lam: f64) -> Result<f64> {
    contract!(lam >= 0.0, "lam must be >= 0, got {lam}");
    contract!(lambdas.iter().all(|l| *l >= 0.0), "eigenvalues must be >= 0");
    if lam == 0.0 {
        return Ok(lambdas.iter().filter(|l| **l > 0.0).count() as f64);
    }
    Ok(lambdas.iter().map(|l| l / (l + lam)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kappa_h: f64,
    pub kappa_tilde: f64,
    pub kappa_sub: f64,
    /// Effective dimension at `γ₂` with the unseen tail eigenvalues set to zero.
    pub d_eff_lo: f64,
    /// Same, with every tail eigenvalue set to `λ_r`.
    pub d_eff_hi: f64,
    /// The sketched eigenvalues `λ_i ≈ σ_i²` of `C`.
    pub spectrum_head: Vec<f64>,
    /// `min(d_{γ₂}/γ₂, (rλ_r + Σ_{i>r}λ_i)/γ₂ + d)`, with `d_{γ₂}` taken at its upper estimate.
    pub theorem1_bound: f64,
}

pub fn condition_report(problem: &Problem, h: &HessianModel, profile: &SmoothnessProfile) -> Result<ConditionReport> {
    check_dim("condition_report", problem.d(), h.d())?;
    let d = problem.d();
    let r = h.rank();
    let g2 = problem.gamma2;
    let head = h.sig2.as_slice().to_vec();
    let trace_c = problem.correlation_trace();
    let head_mass: f64 = head.iter().sum();
    let tail_mass = (trace_c - head_mass).max(0.0);
    let lambda_r = head.last().copied().unwrap_or(0.0);

    let head_deff = effective_dimension(&head, g2)?;
    let d_eff_lo = head_deff;
    let d_eff_hi = head_deff + (d - r) as f64 * lambda_r / (lambda_r + g2);
    let theorem1_bound = (d_eff_hi / g2).min((r as f64 * lambda_r + tail_mass) / g2 + d as f64);

    Ok(ConditionReport {
        kappa_h: profile.l_avg / profile.mu_hat,
        kappa_tilde: (trace_c + d as f64 * g2) / g2,
        kappa_sub: h.kappa_sub(),
        d_eff_lo,
        d_eff_hi,
        spectrum_head: head,
        theorem1_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_model() -> HessianModel {
        // V = first two axes of R^4, σ² = (3, 1), γ₂ = 0.5 → eigenvalues 3.5, 1.5, 1.5, 1.5
        let v = DenseMatrix::from_columns(4, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        HessianModel::new(v, vec![3.0, 1.0].into(), 0.5).unwrap()
    }

    #[test]
    fn eigenstructure() {
        let h = diag_model();
        assert_eq!(h.tail(), 1.5);
        assert_eq!(h.apply_h(&[1.0, 0.0, 0.0, 0.0]).unwrap().as_slice(), &[3.5, 0.0, 0.0, 0.0]);
        assert_eq!(h.apply_h(&[0.0, 0.0, 2.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0, 3.0, 0.0]);
        let inv = h.apply_h_inv(&[3.5, 0.0, 0.0, 1.5]).unwrap();
        assert!((inv[0] - 1.0).abs() < 1e-15 && (inv[3] - 1.0).abs() < 1e-15);
        assert_eq!(h.apply_h(&[0.0; 4]).unwrap().as_slice(), &[0.0; 4]);
        assert!((h.kappa_sub() - 3.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn sparse_quadratic_matches_dense() {
        let h = diag_model();
        let a = [0.3, -1.0, 0.0, 2.0];
        let dense = h.apply_h_inv(&a).unwrap().dot(&a);
        let sparse = h.inv_quad_sparse(&[0, 1, 3], &[0.3, -1.0, 2.0]);
        assert!((dense - sparse).abs() < 1e-14);
    }

    #[test]
    fn isotropic_model() {
        let h = HessianModel::isotropic(3, 2.0).unwrap();
        assert_eq!(h.rank(), 0);
        assert_eq!(h.apply_h(&[1.0, 2.0, 3.0]).unwrap().as_slice(), &[2.0, 4.0, 6.0]);
        assert_eq!(h.lambda_max(), 2.0);
        assert_eq!(h.kappa_sub(), 1.0);
    }

    #[test]
    fn rejects_bad_models() {
        let v = DenseMatrix::zeros(2, 1);
        assert!(HessianModel::new(v.clone(), vec![1.0].into(), 0.0).is_err());
        assert!(HessianModel::new(v, vec![1.0, 2.0].into(), 1.0).is_err());
        let h = diag_model();
        assert!(h.apply_h(&[1.0]).is_err());
    }

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(effective_dimension(&[1.0, 2.0, 0.5], 0.0).unwrap(), 3.0);
        assert_eq!(effective_dimension(&[1.0, 1.0], 1.0).unwrap(), 1.0);
        assert!(effective_dimension(&[-1.0], 1.0).is_err());
        assert!(effective_dimension(&[1.0], -1.0).is_err());
    }

    #[test]
    fn norms_clamp_and_reject() {
        assert_eq!(clamped_sqrt(-1e-16).unwrap(), 0.0);
        assert!(clamped_sqrt(-1e-10).is_err());
    }
}
