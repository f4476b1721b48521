//! Scaled proximal mappings of `γ₁‖·‖₁`:
//! `argmin_z γ₁‖z‖₁ + (1/2η)‖z − u‖²_H`.
//!
//! The production path is a fixed-budget accelerated proximal gradient
//! ([`solve_scaled_prox`]) started from a one-step warm start
//! ([`warm_start`]). [`oracle_scaled_prox`] is a slow, plain proximal gradient
//! run to a tight tolerance, kept independent of the fast path so it can
//! serve as ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::hessian::HessianModel;
use crate::linalg::DenseVector;

/// `sign(y_j) · max(|y_j| − θ, 0)`
pub fn soft_threshold(y: &[f64], theta: f64) -> Result<DenseVector> {
    contract!(theta >= 0.0, "threshold must be >= 0, got {theta}");
    Ok(y.iter().map(|v| shrink(*v, theta)).collect())
}

#[inline]
pub(crate) fn shrink(v: f64, theta: f64) -> f64 {
    if v > theta {
        v - theta
    } else if v < -theta {
        v + theta
    } else {
        0.0
    }
}

pub(crate) fn shrink_in_place(y: &mut [f64], theta: f64) {
    y.iter_mut().for_each(|v| *v = shrink(*v, theta));
}

/// One scaled subproblem `p(z) = γ₁‖z‖₁ + (1/2η)‖z − u‖²_H`.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub u: &'a [f64],
    pub eta: f64,
    pub h: &'a HessianModel,
    pub gamma1: f64,
}

impl<'a> SubproblemSpec<'a> {
    pub fn new(u: &'a [f64], eta: f64, h: &'a HessianModel, gamma1: f64) -> Result<Self> {
        contract!(eta > 0.0, "eta must be > 0, got {eta}");
        contract!(gamma1 >= 0.0, "gamma1 must be >= 0, got {gamma1}");
        check_dim("SubproblemSpec", h.d(), u.len())?;
        Ok(Self { u, eta, h, gamma1 })
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = z.iter().zip(self.u).map(|(a, b)| a - b).collect();
        let hn = self.h.h_norm(&diff)?;
        Ok(self.gamma1 * z.iter().map(|v| v.abs()).sum::<f64>() + hn * hn / (2.0 * self.eta))
    }

    /// `H(z − u)/η`
    pub fn smooth_grad(&self, z: &[f64]) -> Result<DenseVector> {
        let diff: Vec<f64> = z.iter().zip(self.u).map(|(a, b)| a - b).collect();
        Ok(self.h.apply_h(&diff)?.scaled(1.0 / self.eta))
    }

    /// Proximal-gradient step with step size `η/λ₁(H)`.
    fn prox_grad_step(&self, z: &[f64]) -> Result<DenseVector> {
        let step = self.eta / self.h.lambda_max();
        let mut next = DenseVector::from_vec(z.to_vec());
        next.axpy(-step, &self.smooth_grad(z)?);
        shrink_in_place(&mut next, step * self.gamma1);
        Ok(next)
    }

    /// Norm of the gradient mapping `(z − T(z))/step`; zero exactly at the minimizer.
    pub fn gradient_mapping_norm(&self, z: &[f64]) -> Result<f64> {
        let step = self.eta / self.h.lambda_max();
        let next = self.prox_grad_step(z)?;
        Ok(next.sub(z).norm() / step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubproblemBudget {
    pub iters: usize,
    /// Warm-start step `γ = η/λ₁(H)`.
    pub gamma_ws: f64,
    pub rho: f64,
}

impl SubproblemBudget {
    /// Scales the iteration count (for ablations), keeping at least one iteration.
    pub fn with_multiplier(mut self, m: f64) -> Self {
        self.iters = ((self.iters as f64 * m).ceil() as usize).max(1);
        self
    }
}

/// `iters = ceil(√κ_sub · ln(κ_sub/(1 − ρ)))`, at least 1.
pub fn subproblem_budget(h: &HessianModel, eta: f64, rho: f64) -> Result<SubproblemBudget> {
    contract!(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1), got {rho}");
    contract!(eta > 0.0, "eta must be > 0, got {eta}");
    let iters = budget_iters(h.kappa_sub(), rho);
    Ok(SubproblemBudget {
        iters,
        gamma_ws: eta / h.lambda_max(),
        rho,
    })
}

pub(crate) fn budget_iters(kappa_sub: f64, rho: f64) -> usize {
    let raw = kappa_sub.sqrt() * (kappa_sub / (1.0 - rho)).ln();
    (raw.ceil() as usize).max(1)
}

/// `z₀ = prox_{γh}(x_k − (γ/η) H(x_k − u_prev))`
pub fn warm_start(
    x_k: &[f64],
    u_prev: &[f64],
    h: &HessianModel,
    eta: f64,
    gamma_ws: f64,
    gamma1: f64,
) -> Result<DenseVector> {
    check_dim("warm_start", x_k.len(), u_prev.len())?;
    let diff: Vec<f64> = x_k.iter().zip(u_prev).map(|(a, b)| a - b).collect();
    let mut z = DenseVector::from_vec(x_k.to_vec());
    z.axpy(-gamma_ws / eta, &h.apply_h(&diff)?);
    shrink_in_place(&mut z, gamma_ws * gamma1);
    Ok(z)
}

/// Exactly `budget.iters` steps of constant-momentum accelerated proximal
/// gradient on the subproblem, from `z0`.
pub fn solve_scaled_prox(spec: &SubproblemSpec<'_>, z0: &[f64], budget: &SubproblemBudget) -> Result<DenseVector> {
    check_dim("solve_scaled_prox", spec.u.len(), z0.len())?;
    contract!(budget.iters >= 1, "subproblem budget must be >= 1 iteration");
    let h = spec.h;
    let sk = h.kappa_sub().sqrt();
    let beta = (sk - 1.0) / (sk + 1.0);
    // step η/λ₁(H) on the gradient H(w − u)/η
    let inv_l = 1.0 / h.lambda_max();
    let theta = spec.gamma1 * spec.eta * inv_l;
    let d = z0.len();
    let mut prev = z0.to_vec();
    let mut w = z0.to_vec();
    let mut z = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut hd = vec![0.0; d];
    let mut coef = vec![0.0; h.rank()];
    for _ in 0..budget.iters {
        for ((dj, wj), uj) in diff.iter_mut().zip(&w).zip(spec.u) {
            *dj = wj - uj;
        }
        h.apply_h_into(&diff, &mut hd, &mut coef);
        for ((zj, wj), hj) in z.iter_mut().zip(&w).zip(&hd) {
            *zj = shrink(wj - inv_l * hj, theta);
        }
        for ((wj, zj), pj) in w.iter_mut().zip(&z).zip(prev.iter_mut()) {
            *wj = zj + beta * (zj - *pj);
            *pj = *zj;
        }
    }
    Ok(z.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub z: DenseVector,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

pub const ORACLE_TOL: f64 = 1e-13;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;

/// Plain proximal gradient from `u` until the gradient-mapping norm is `≤ tol`.
pub fn oracle_scaled_prox(spec: &SubproblemSpec<'_>, tol: f64) -> Result<OracleSolution> {
    contract!(tol > 0.0, "tol must be > 0, got {tol}");
    let step = spec.eta / spec.h.lambda_max();
    let mut z = DenseVector::from_vec(spec.u.to_vec());
    for it in 0..ORACLE_MAX_ITERS {
        let next = spec.prox_grad_step(&z)?;
        let gm = next.sub(&z).norm() / step;
        z = next;
        if gm <= tol {
            return Ok(OracleSolution {
                z,
                iterations: it + 1,
                converged: true,
            });
        }
    }
    Ok(OracleSolution {
        z,
        iterations: ORACLE_MAX_ITERS,
        converged: false,
    })
}
