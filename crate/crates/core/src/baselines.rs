//! First-order reference solvers: proximal gradient, FISTA, ProxSVRG and
//! Katyusha1. All start at zero and emit the same trace format as the main
//! solver; their epochs count data passes only.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Problem;
use crate::error::{contract, Error, Result};
use crate::linalg::{spectral_norm, DenseVector, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::prox::shrink_in_place;
use crate::rng::{self, Rng};
use crate::svrg::{Sampling, DIVERGENCE_FACTOR};
use crate::trace::{SolverTrace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pgd,
    Fista,
    ProxSvrg,
    Katyusha1,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pgd => "pgd",
            Method::Fista => "fista",
            Method::ProxSvrg => "prox_svrg",
            Method::Katyusha1 => "katyusha1",
        }
    }
}

/// Unset fields take the defaults documented on each solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub step: Option<f64>,
    pub batch: Option<usize>,
    pub epoch_len: Option<usize>,
    /// Budget in data passes.
    pub max_epochs: Option<f64>,
    /// Iteration cap: iterations for the full-gradient methods, stages for the stochastic ones.
    pub max_iters: Option<usize>,
    pub seed: u64,
    /// ProxSVRG only; `Nonuniform` samples proportionally to `‖a_i‖² + γ₂`.
    pub sampling: Sampling,
    /// Katyusha negative momentum; default `0.5/b`.
    pub tau2: Option<f64>,
    /// Katyusha coupling; default `min(√(nγ₂/(3L̄)), 0.5)`.
    pub tau1: Option<f64>,
    /// `λ₁(C)`, if already known; otherwise computed by power iteration.
    pub lambda_max: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            step: None,
            batch: None,
            epoch_len: None,
            max_epochs: Some(100.0),
            max_iters: None,
            seed: 0,
            sampling: Sampling::Uniform,
            tau2: None,
            tau1: None,
            lambda_max: None,
        }
    }
}

/// `λ₁(C) = σ₁(A)²/n`, by power iteration.
pub fn correlation_lambda_max(problem: &Problem, seed: u64) -> Result<f64> {
    let s = spectral_norm(&problem.a, DEFAULT_TOL, DEFAULT_MAX_ITERS, seed)?;
    Ok(s.value * s.value / problem.n() as f64)
}

fn smoothness(problem: &Problem, cfg: &BaselineConfig) -> Result<f64> {
    let lam = match cfg.lambda_max {
        Some(l) => l,
        None => correlation_lambda_max(problem, cfg.seed)?,
    };
    Ok(lam + problem.gamma2)
}

/// Default mini-batch for the stochastic baselines: `round(√n)`.
pub fn sqrt_n_batch(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).clamp(1, n.max(1))
}

pub fn run(problem: &Problem, method: Method, cfg: &BaselineConfig) -> Result<(DenseVector, SolverTrace)> {
    match method {
        Method::Pgd => pgd(problem, cfg),
        Method::Fista => fista(problem, cfg),
        Method::ProxSvrg => prox_svrg(problem, cfg),
        Method::Katyusha1 => katyusha1(problem, cfg),
    }
}

/// Trace bookkeeping plus the divergence guard and epoch budget.
struct Recorder<'a> {
    problem: &'a Problem,
    trace: SolverTrace,
    f0: f64,
    start: Instant,
    max_epochs: Option<f64>,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a Problem, x0: &[f64], max_epochs: Option<f64>) -> Self {
        let f0 = problem.objective(x0);
        let mut trace = SolverTrace::new(problem.n(), 0);
        trace.push(TraceRow {
            outer: 0,
            inner: 0,
            epoch: 0.0,
            objective: f0,
            grad_evals: 0,
            sub_iters: 0,
            wall_ns: 0,
        });
        Self {
            problem,
            trace,
            f0,
            start: Instant::now(),
            max_epochs,
        }
    }

    /// Records a row; `Ok(true)` means the epoch budget is exhausted.
    fn record(&mut self, outer: usize, inner: usize, x: &DenseVector, grad_evals: u64) -> Result<bool> {
        let obj = self.problem.objective(x);
        let row = TraceRow {
            outer,
            inner,
            epoch: self.trace.epoch_equiv(grad_evals, 0),
            objective: obj,
            grad_evals,
            sub_iters: 0,
            wall_ns: self.start.elapsed().as_nanos() as u64,
        };
        self.trace.push(row);
        if !obj.is_finite() || !x.is_finite() || obj > DIVERGENCE_FACTOR * self.f0.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                outer,
                inner,
                trace: Box::new(std::mem::take(&mut self.trace)),
            });
        }
        Ok(self.max_epochs.is_some_and(|m| row.epoch >= m))
    }

    fn exhausted(&self) -> bool {
        match (self.max_epochs, self.trace.last()) {
            (Some(m), Some(r)) => r.epoch >= m,
            _ => false,
        }
    }
}

fn check_budget(cfg: &BaselineConfig) -> Result<()> {
    contract!(
        cfg.max_epochs.is_some() || cfg.max_iters.is_some(),
        "either max_epochs or max_iters must be set"
    );
    if let Some(s) = cfg.step {
        contract!(s > 0.0 && s.is_finite(), "step must be > 0, got {s}");
    }
    Ok(())
}

/// Proximal gradient with step `1/(λ₁(C) + γ₂)` by default.
pub fn pgd(problem: &Problem, cfg: &BaselineConfig) -> Result<(DenseVector, SolverTrace)> {
    check_budget(cfg)?;
    let step = match cfg.step {
        Some(s) => s,
        None => 1.0 / smoothness(problem, cfg)?,
    };
    let n = problem.n() as u64;
    let mut x = DenseVector::zeros(problem.d());
    let mut rec = Recorder::new(problem, &x, cfg.max_epochs);
    let mut evals = 0;
    for k in 0..cfg.max_iters.unwrap_or(usize::MAX) {
        let g = problem.full_gradient(&x)?;
        x.axpy(-step, &g);
        shrink_in_place(&mut x, step * problem.gamma1);
        evals += n;
        if rec.record(0, k + 1, &x, evals)? {
            break;
        }
    }
    Ok((x, rec.trace))
}

/// FISTA for strongly convex objectives: step `1/L` with `L = λ₁(C) + γ₂`
/// by default, constant momentum `(√κ − 1)/(√κ + 1)`, `κ = L/γ₂`.
pub fn fista(problem: &Problem, cfg: &BaselineConfig) -> Result<(DenseVector, SolverTrace)> {
    check_budget(cfg)?;
    let l = smoothness(problem, cfg)?;
    let step = cfg.step.unwrap_or(1.0 / l);
    let sk = (l / problem.gamma2).sqrt();
    let beta = (sk - 1.0) / (sk + 1.0);
    let n = problem.n() as u64;
    let mut x = DenseVector::zeros(problem.d());
    let mut y = x.clone();
    let mut rec = Recorder::new(problem, &x, cfg.max_epochs);
    let mut evals = 0;
    for k in 0..cfg.max_iters.unwrap_or(usize::MAX) {
        let mut next = y.clone();
        next.axpy(-step, &problem.full_gradient(&y)?);
        shrink_in_place(&mut next, step * problem.gamma1);
        for ((yj, nj), xj) in y.iter_mut().zip(next.iter()).zip(x.iter()) {
            *yj = nj + beta * (nj - xj);
        }
        x = next;
        evals += n;
        if rec.record(0, k + 1, &x, evals)? {
            break;
        }
    }
    Ok((x, rec.trace))
}

/// Cumulative weights for `p_i ∝ w_i`, last entry exactly 1.
fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cum: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc / total
        })
        .collect();
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    cum
}

fn draw(cum: Option<&[f64]>, n: usize, rng: &mut Rng) -> usize {
    match cum {
        None => rng::uniform_index(rng, n),
        Some(c) => {
            let u = rng::uniform(rng);
            c.partition_point(|v| *v <= u).min(n - 1)
        }
    }
}

/// Adds `(1/b) Σ (∇f_i(x) − ∇f_i(x̃)) / (n p_i)` for the given indices to `v`.
fn add_variance_correction(
    problem: &Problem,
    v: &mut DenseVector,
    x: &[f64],
    x_tilde: &[f64],
    indices: &[usize],
    probs: Option<&[f64]>,
) {
    let n = problem.n() as f64;
    let b = indices.len() as f64;
    let mut ridge = 0.0;
    for &i in indices {
        let w = probs.map_or(1.0 / b, |p| 1.0 / (b * n * p[i]));
        let (cols, vals) = problem.a.row(i);
        let coef: f64 = cols.iter().zip(vals).map(|(c, a)| a * (x[*c] - x_tilde[*c])).sum();
        if coef != 0.0 {
            problem.a.row_axpy(i, w * coef, v);
        }
        ridge += w;
    }
    let g = problem.gamma2 * ridge;
    for ((vj, xj), tj) in v.iter_mut().zip(x).zip(x_tilde) {
        *vj += g * (xj - tj);
    }
}

struct StochasticSetup {
    batch: usize,
    epoch_len: usize,
    probs: Option<Vec<f64>>,
    cum: Option<Vec<f64>>,
}

fn stochastic_setup(problem: &Problem, cfg: &BaselineConfig, sampling: Sampling) -> Result<StochasticSetup> {
    let n = problem.n();
    let batch = cfg.batch.unwrap_or_else(|| sqrt_n_batch(n));
    contract!(batch >= 1 && batch <= n, "batch must lie in [1, n = {n}], got {batch}");
    let epoch_len = cfg.epoch_len.unwrap_or_else(|| (2 * n).div_ceil(batch));
    contract!(epoch_len >= 1, "epoch_len must be >= 1");
    let (probs, cum) = match sampling {
        Sampling::Uniform => (None, None),
        Sampling::Nonuniform => {
            let w: Vec<f64> = (0..n).map(|i| problem.a.row_norm_sq(i) + problem.gamma2).collect();
            let total: f64 = w.iter().sum();
            (Some(w.iter().map(|wi| wi / total).collect()), Some(cumulative(&w)))
        }
    };
    Ok(StochasticSetup {
        batch,
        epoch_len,
        probs,
        cum,
    })
}

/// Mini-batch ProxSVRG: `x ← prox_{ηh}(x − ηv)`, the last inner iterate
/// becomes the next anchor. Default step `1/(4L)` with `L` the average
/// (weighted sampling) or maximum (uniform) of `‖a_i‖² + γ₂`; default batch
/// `round(√n)`, epoch length `⌈2n/b⌉`.
pub fn prox_svrg(problem: &Problem, cfg: &BaselineConfig) -> Result<(DenseVector, SolverTrace)> {
    check_budget(cfg)?;
    let setup = stochastic_setup(problem, cfg, cfg.sampling)?;
    let n = problem.n();
    let step = match cfg.step {
        Some(s) => s,
        None => {
            let li = (0..n).map(|i| problem.a.row_norm_sq(i) + problem.gamma2);
            let l = match cfg.sampling {
                Sampling::Uniform => li.fold(0.0, f64::max),
                Sampling::Nonuniform => li.sum::<f64>() / n as f64,
            };
            1.0 / (4.0 * l)
        }
    };
    let mut rng = rng::seeded(cfg.seed);
    let mut x_tilde = DenseVector::zeros(problem.d());
    let mut x = x_tilde.clone();
    let mut rec = Recorder::new(problem, &x, cfg.max_epochs);
    let mut evals = 0u64;
    let mut idx = vec![0; setup.batch];
    for s in 0..cfg.max_iters.unwrap_or(usize::MAX) {
        if rec.exhausted() {
            break;
        }
        let full = problem.full_gradient(&x_tilde)?;
        evals += n as u64;
        x.clone_from(&x_tilde);
        for k in 0..setup.epoch_len {
            for i in idx.iter_mut() {
                *i = draw(setup.cum.as_deref(), n, &mut rng);
            }
            let mut v = full.clone();
            add_variance_correction(problem, &mut v, &x, &x_tilde, &idx, setup.probs.as_deref());
            x.axpy(-step, &v);
            shrink_in_place(&mut x, step * problem.gamma1);
            evals += 2 * setup.batch as u64;
            if rec.record(s, k + 1, &x, evals)? {
                return Ok((x, rec.trace));
            }
        }
        x_tilde.clone_from(&x);
    }
    Ok((x_tilde, rec.trace))
}

/// Option-I anchor: `Σ_j w^j y_j / Σ_j w^j` with `w = 1 + ασ`, `j = 0, 1, …`.
pub fn katyusha_anchor(ys: &[DenseVector], alpha: f64, sigma: f64) -> DenseVector {
    let d = ys.first().map_or(0, |y| y.len());
    let mut out = DenseVector::zeros(d);
    let w = 1.0 + alpha * sigma;
    let mut weight = 1.0;
    let mut total = 0.0;
    for y in ys {
        out.axpy(weight, y);
        total += weight;
        weight *= w;
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Resolved Katyusha constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatyushaParams {
    pub batch: usize,
    pub epoch_len: usize,
    pub tau1: f64,
    pub tau2: f64,
    /// Mirror step `α`.
    pub alpha: f64,
    /// Gradient step of the `y` update (`1/(3L̄)` in theory).
    pub y_step: f64,
}

/// `τ₂ = 0.5/b`, `τ₁ = min(√(nγ₂/(3L̄)), 0.5)`, `α = 1/(3τ₁L̄)`, `L̄ = λ₁(C) + γ₂`.
/// A supplied `step` replaces the theoretical `1/(3L̄)` and scales `α` with it.
pub fn katyusha_params(problem: &Problem, cfg: &BaselineConfig) -> Result<KatyushaParams> {
    let setup = stochastic_setup(problem, cfg, Sampling::Uniform)?;
    let l = smoothness(problem, cfg)?;
    let n = problem.n() as f64;
    let tau2 = cfg.tau2.unwrap_or(0.5 / setup.batch as f64);
    let tau1 = cfg.tau1.unwrap_or_else(|| (n * problem.gamma2 / (3.0 * l)).sqrt().min(0.5));
    contract!(tau1 > 0.0 && tau2 >= 0.0 && tau1 + tau2 <= 1.0, "need tau1 > 0, tau2 >= 0, tau1 + tau2 <= 1");
    let y_step = cfg.step.unwrap_or(1.0 / (3.0 * l));
    Ok(KatyushaParams {
        batch: setup.batch,
        epoch_len: setup.epoch_len,
        tau1,
        tau2,
        alpha: y_step / tau1,
        y_step,
    })
}

/// Katyusha1 (Option I) with uniform mini-batches.
pub fn katyusha1(problem: &Problem, cfg: &BaselineConfig) -> Result<(DenseVector, SolverTrace)> {
    check_budget(cfg)?;
    let p = katyusha_params(problem, cfg)?;
    let n = problem.n();
    let g1 = problem.gamma1;
    let mut rng = rng::seeded(cfg.seed);
    let mut x_tilde = DenseVector::zeros(problem.d());
    let mut y = x_tilde.clone();
    let mut z = x_tilde.clone();
    let mut x = x_tilde.clone();
    let mut rec = Recorder::new(problem, &x_tilde, cfg.max_epochs);
    let mut evals = 0u64;
    let mut idx = vec![0; p.batch];
    let mut ys: Vec<DenseVector> = Vec::with_capacity(p.epoch_len);
    for s in 0..cfg.max_iters.unwrap_or(usize::MAX) {
        if rec.exhausted() {
            break;
        }
        let full = problem.full_gradient(&x_tilde)?;
        evals += n as u64;
        ys.clear();
        for k in 0..p.epoch_len {
            for ((xj, zj), (tj, yj)) in x.iter_mut().zip(z.iter()).zip(x_tilde.iter().zip(y.iter())) {
                *xj = p.tau1 * zj + p.tau2 * tj + (1.0 - p.tau1 - p.tau2) * yj;
            }
            for i in idx.iter_mut() {
                *i = rng::uniform_index(&mut rng, n);
            }
            let mut g = full.clone();
            add_variance_correction(problem, &mut g, &x, &x_tilde, &idx, None);
            z.axpy(-p.alpha, &g);
            shrink_in_place(&mut z, p.alpha * g1);
            y.clone_from(&x);
            y.axpy(-p.y_step, &g);
            shrink_in_place(&mut y, p.y_step * g1);
            evals += 2 * p.batch as u64;
            ys.push(y.clone());
            if rec.record(s, k + 1, &y, evals)? {
                return Ok((y, rec.trace));
            }
        }
        x_tilde = katyusha_anchor(&ys, p.alpha, problem.gamma2);
    }
    Ok((x_tilde, rec.trace))
}
