//! Inexact accelerated scaled proximal SVRG.
//!
//! Each outer stage takes a full gradient at the anchor `x̃`, then runs `T`
//! inner steps:
//!
//! ```text
//! y   = (x + τz)/(1 + τ)
//! v   = mini-batch variance-reduced gradient at y
//! u   = y − η H⁻¹ v
//! x⁺ ≈ argmin_z γ₁‖z‖₁ + (1/2η)‖z − u‖²_H      (warm start + fixed budget)
//! g   = (y − x⁺)/η
//! z⁺  = z + τ(y − z) − (τ/μ̂) g
//! ```
//!
//! and the last inner iterate becomes the next anchor.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Problem;
use crate::error::{check_dim, contract, Error, Result};
use crate::hessian::{HessianModel, SmoothnessProfile};
use crate::linalg::DenseVector;
use crate::prox::{
    oracle_scaled_prox, solve_scaled_prox, subproblem_budget, warm_start, SubproblemBudget, SubproblemSpec,
    ORACLE_TOL,
};
use crate::rng::{self, Rng};
use crate::trace::{EpochMeasure, SolverTrace, TraceRow};

/// An objective this many times the starting one counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `p_i = ℓ_i / (n L_avg)`
    #[default]
    Nonuniform,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProxMode {
    /// Warm start plus the fixed iteration budget.
    #[default]
    Budget,
    /// Solve every subproblem to high precision (testing only; slow).
    Oracle,
}

/// Unset fields take the theory defaults (see [`SolverConfig::resolve`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eta: Option<f64>,
    pub tau: Option<f64>,
    pub batch: Option<usize>,
    pub epoch_len: Option<usize>,
    pub rho: Option<f64>,
    /// Maximum number of outer stages.
    pub outer_iters: Option<usize>,
    /// Stop as soon as this many epochs (in `epoch_measure`) have elapsed.
    pub max_epochs: Option<f64>,
    pub epoch_measure: EpochMeasure,
    pub sampling: Sampling,
    pub seed: u64,
    pub budget_multiplier: f64,
    pub prox_mode: ProxMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: None,
            tau: None,
            batch: None,
            epoch_len: None,
            rho: None,
            outer_iters: None,
            max_epochs: Some(100.0),
            epoch_measure: EpochMeasure::DataPasses,
            sampling: Sampling::Nonuniform,
            seed: 0,
            budget_multiplier: 1.0,
            prox_mode: ProxMode::Budget,
        }
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub eta: f64,
    pub tau: f64,
    pub batch: usize,
    pub epoch_len: usize,
    pub rho: f64,
    pub mu_hat: f64,
    /// `L_avg` for non-uniform sampling, `L_max` for uniform.
    pub l_ref: f64,
    pub sampling: Sampling,
    pub budget: SubproblemBudget,
    pub prox_mode: ProxMode,
}

/// `min(n, ceil(60 √(L/μ)))`, plus whether the cap at `n` was hit.
pub fn default_batch(l: f64, mu: f64, n: usize) -> (usize, bool) {
    let want = (60.0 * (l / mu).sqrt()).ceil();
    if want > n as f64 {
        (n, true)
    } else {
        ((want as usize).max(1), false)
    }
}

impl SolverConfig {
    /// Fills in `η = 1/L`, `τ = √(μ̂/2L)`, `b = min(n, ⌈60√(L/μ̂)⌉)`,
    /// `T = ⌈2n/b⌉`, `ρ = 0.9τ`, where `L` is `L_avg` (or `L_max` under uniform
    /// sampling). Returns any warnings raised along the way.
    pub fn resolve(&self, problem: &Problem, h: &HessianModel, profile: &SmoothnessProfile) -> Result<(SolverParams, Vec<String>)> {
        check_dim("SolverConfig::resolve", problem.n(), profile.n())?;
        check_dim("SolverConfig::resolve", problem.d(), h.d())?;
        let n = problem.n();
        let mu = profile.mu_hat;
        let l_ref = match self.sampling {
            Sampling::Nonuniform => profile.l_avg,
            Sampling::Uniform => profile.l_max,
        };
        let mut warnings = Vec::new();
        let eta = self.eta.unwrap_or(1.0 / l_ref);
        let tau = self.tau.unwrap_or_else(|| (mu / (2.0 * l_ref)).sqrt());
        let batch = match self.batch {
            Some(b) => b,
            None => {
                let (b, capped) = default_batch(l_ref, mu, n);
                if capped {
                    let msg = format!(
                        "batch 60*sqrt(L/mu) = {:.1} exceeds n = {n}; capped at n",
                        60.0 * (l_ref / mu).sqrt()
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                b
            }
        };
        let epoch_len = self.epoch_len.unwrap_or_else(|| (2 * n).div_ceil(batch.max(1)));
        let rho = self.rho.unwrap_or(0.9 * tau);

        contract!(eta > 0.0 && eta.is_finite(), "eta must be > 0, got {eta}");
        contract!((0.0..=1.0).contains(&tau), "tau must lie in [0, 1], got {tau}");
        contract!(batch >= 1 && batch <= n, "batch must lie in [1, n = {n}], got {batch}");
        contract!(epoch_len >= 1, "epoch_len must be >= 1");
        contract!(mu > 0.0, "mu_hat must be > 0");
        contract!(self.budget_multiplier > 0.0, "budget multiplier must be > 0");
        contract!(
            self.outer_iters.is_some() || self.max_epochs.is_some(),
            "either outer_iters or max_epochs must be set"
        );
        let budget = match self.prox_mode {
            ProxMode::Budget => subproblem_budget(h, eta, rho)?.with_multiplier(self.budget_multiplier),
            // Unused by the oracle; keep the warm-start step meaningful.
            ProxMode::Oracle => SubproblemBudget {
                iters: 1,
                gamma_ws: eta / h.lambda_max(),
                rho,
            },
        };
        Ok((
            SolverParams {
                eta,
                tau,
                batch,
                epoch_len,
                rho,
                mu_hat: mu,
                l_ref,
                sampling: self.sampling,
                budget,
                prox_mode: self.prox_mode,
            },
            warnings,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DenseVector,
    pub y: DenseVector,
    pub z: DenseVector,
    pub x_tilde: DenseVector,
    pub full_grad: DenseVector,
    /// `u` of the previous inner step, used by the warm start.
    pub u_prev: DenseVector,
    pub rng: Rng,
    pub outer: usize,
    pub inner: usize,
    pub grad_evals: u64,
    pub sub_iters: u64,
}

impl SolverState {
    /// All iterates at `x0`; `u_{−1} := x0`, so the very first warm start is a
    /// plain proximal-gradient step from `x0`.
    pub fn new(x0: DenseVector, seed: u64) -> Self {
        let d = x0.len();
        Self {
            y: x0.clone(),
            z: x0.clone(),
            x_tilde: x0.clone(),
            u_prev: x0.clone(),
            full_grad: DenseVector::zeros(d),
            x: x0,
            rng: rng::seeded(seed),
            outer: 0,
            inner: 0,
            grad_evals: 0,
            sub_iters: 0,
        }
    }

    /// Starts a stage at the current anchor: full gradient, `x = z = x̃`.
    pub fn begin_stage(&mut self, problem: &Problem) -> Result<()> {
        self.full_grad = problem.full_gradient(&self.x_tilde)?;
        self.grad_evals += problem.n() as u64;
        self.x.clone_from(&self.x_tilde);
        self.z.clone_from(&self.x_tilde);
        self.inner = 0;
        Ok(())
    }

    /// Closes a stage: `x̃ ← x`.
    pub fn end_stage(&mut self) {
        self.x_tilde.clone_from(&self.x);
        self.outer += 1;
    }
}

/// `a_i(a_iᵀx − b_i) + γ₂x`
pub fn component_gradient(problem: &Problem, i: usize, x: &[f64]) -> DenseVector {
    let r = problem.a.row_dot(i, x) - problem.b[i];
    let mut g = DenseVector::from_vec(x.iter().map(|v| problem.gamma2 * v).collect());
    problem.a.row_axpy(i, r, &mut g);
    g
}

/// `b` i.i.d. indices, with replacement.
pub fn draw_batch(profile: &SmoothnessProfile, sampling: Sampling, batch: usize, rng: &mut Rng) -> Vec<usize> {
    let n = profile.n();
    (0..batch)
        .map(|_| match sampling {
            Sampling::Nonuniform => profile.sample(rng),
            Sampling::Uniform => rng::uniform_index(rng, n),
        })
        .collect()
}

/// `v = ∇f(x̃) + (1/b) Σ_{i∈B} (∇f_i(y) − ∇f_i(x̃)) / (n p_i)` for a given batch.
pub fn minibatch_gradient_with_indices(
    problem: &Problem,
    profile: &SmoothnessProfile,
    sampling: Sampling,
    y: &[f64],
    x_tilde: &[f64],
    full_grad: &[f64],
    indices: &[usize],
) -> Result<DenseVector> {
    check_dim("minibatch_gradient", problem.d(), y.len())?;
    check_dim("minibatch_gradient", problem.d(), x_tilde.len())?;
    contract!(!indices.is_empty(), "empty mini-batch");
    let n = problem.n() as f64;
    let b = indices.len() as f64;
    let mut v = DenseVector::from_vec(full_grad.to_vec());
    let mut ridge_weight = 0.0;
    for &i in indices {
        let w = match sampling {
            Sampling::Uniform => 1.0 / b,
            Sampling::Nonuniform => 1.0 / (b * n * profile.p(i)),
        };
        let coef = problem.row_diff_dot(i, y, x_tilde);
        if coef != 0.0 {
            problem.a.row_axpy(i, w * coef, &mut v);
        }
        ridge_weight += w;
    }
    // γ₂(y − x̃) appears in every component difference
    let g = problem.gamma2 * ridge_weight;
    for ((vj, yj), xj) in v.iter_mut().zip(y).zip(x_tilde) {
        *vj += g * (yj - xj);
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
pub fn minibatch_gradient(
    problem: &Problem,
    profile: &SmoothnessProfile,
    sampling: Sampling,
    y: &[f64],
    x_tilde: &[f64],
    full_grad: &[f64],
    batch: usize,
    rng: &mut Rng,
) -> Result<DenseVector> {
    let idx = draw_batch(profile, sampling, batch, rng);
    minibatch_gradient_with_indices(problem, profile, sampling, y, x_tilde, full_grad, &idx)
}

/// Intermediate quantities of one inner step, exposed for instrumentation.
#[derive(Debug, Clone)]
pub struct InnerStep {
    pub y: DenseVector,
    pub v: DenseVector,
    pub u: DenseVector,
    /// Warm start used by the subproblem solver (absent in oracle mode).
    pub z0: Option<DenseVector>,
}

pub fn inner_step(
    state: &mut SolverState,
    problem: &Problem,
    h: &HessianModel,
    profile: &SmoothnessProfile,
    params: &SolverParams,
) -> Result<InnerStep> {
    let SolverParams { eta, tau, .. } = *params;
    let y: DenseVector = state
        .x
        .iter()
        .zip(state.z.iter())
        .map(|(x, z)| (x + tau * z) / (1.0 + tau))
        .collect();
    let v = minibatch_gradient(
        problem,
        profile,
        params.sampling,
        &y,
        &state.x_tilde,
        &state.full_grad,
        params.batch,
        &mut state.rng,
    )?;
    let mut u = y.clone();
    u.axpy(-eta, &h.apply_h_inv(&v)?);

    let spec = SubproblemSpec::new(&u, eta, h, problem.gamma1)?;
    let (x_next, z0) = match params.prox_mode {
        ProxMode::Budget => {
            let z0 = warm_start(&state.x, &state.u_prev, h, eta, params.budget.gamma_ws, problem.gamma1)?;
            let x_next = solve_scaled_prox(&spec, &z0, &params.budget)?;
            state.sub_iters += params.budget.iters as u64;
            (x_next, Some(z0))
        }
        ProxMode::Oracle => {
            let sol = oracle_scaled_prox(&spec, ORACLE_TOL)?;
            state.sub_iters += sol.iterations as u64;
            (sol.z, None)
        }
    };

    // z⁺ = z + τ(y − z) − (τ/μ̂)(y − x⁺)/η
    let c = tau / (params.mu_hat * eta);
    for ((zj, yj), xj) in state.z.iter_mut().zip(y.iter()).zip(x_next.iter()) {
        *zj += tau * (yj - *zj) - c * (yj - xj);
    }
    state.x = x_next;
    state.y.clone_from(&y);
    state.u_prev.clone_from(&u);
    state.grad_evals += 2 * params.batch as u64;
    state.inner += 1;
    Ok(InnerStep { y, v, u, z0 })
}

/// Runs the method from `x = 0`. Stops after `outer_iters` stages or once
/// `max_epochs` is reached, whichever comes first; the latter may end a
/// stage early, in which case the current inner iterate is returned.
pub fn run(
    problem: &Problem,
    h: &HessianModel,
    profile: &SmoothnessProfile,
    cfg: &SolverConfig,
) -> Result<(DenseVector, SolverTrace)> {
    let (params, warnings) = cfg.resolve(problem, h, profile)?;
    run_with_params(problem, h, profile, &params, cfg, warnings)
}

pub fn run_with_params(
    problem: &Problem,
    h: &HessianModel,
    profile: &SmoothnessProfile,
    params: &SolverParams,
    cfg: &SolverConfig,
    warnings: Vec<String>,
) -> Result<(DenseVector, SolverTrace)> {
    let start = Instant::now();
    let mut trace = SolverTrace::new(problem.n(), h.rank());
    trace.warnings = warnings;
    let mut state = SolverState::new(DenseVector::zeros(problem.d()), cfg.seed);
    let f0 = problem.objective(&state.x);
    trace.push(TraceRow {
        outer: 0,
        inner: 0,
        epoch: 0.0,
        objective: f0,
        grad_evals: 0,
        sub_iters: 0,
        wall_ns: 0,
    });
    let max_stages = cfg.outer_iters.unwrap_or(usize::MAX);
    let done = |trace: &SolverTrace| match (cfg.max_epochs, trace.last()) {
        (Some(limit), Some(row)) => trace.measure(row, cfg.epoch_measure) >= limit,
        _ => false,
    };

    while state.outer < max_stages && !done(&trace) {
        state.begin_stage(problem)?;
        for _ in 0..params.epoch_len {
            inner_step(&mut state, problem, h, profile, params)?;
            let obj = problem.objective(&state.x);
            trace.push(TraceRow {
                outer: state.outer,
                inner: state.inner,
                epoch: trace.epoch_equiv(state.grad_evals, state.sub_iters),
                objective: obj,
                grad_evals: state.grad_evals,
                sub_iters: state.sub_iters,
                wall_ns: start.elapsed().as_nanos() as u64,
            });
            if !obj.is_finite() || !state.x.is_finite() || obj > DIVERGENCE_FACTOR * f0.max(f64::MIN_POSITIVE) {
                return Err(Error::Diverged {
                    outer: state.outer,
                    inner: state.inner,
                    trace: Box::new(trace),
                });
            }
            if done(&trace) {
                return Ok((state.x, trace));
            }
        }
        state.end_stage();
    }
    Ok((state.x_tilde, trace))
}

/// `V = F(x) − F(x⋆) + (μ̂/2)‖z − x⋆‖²_H`
pub fn lyapunov_value(state: &SolverState, x_star: &[f64], h: &HessianModel, mu_hat: f64, problem: &Problem) -> Result<f64> {
    let gap = problem.objective(&state.x) - problem.objective(x_star);
    let dz = state.z.sub(x_star);
    let hn = h.h_norm(&dz)?;
    Ok(gap + 0.5 * mu_hat * hn * hn)
}
