//! The benchmark protocol: sketch once, compute diagnostics and `F⋆`, tune each
//! method's step on a short budget, then run the full budget and summarize.
//!
//! Output layout under `output_dir/<dataset>/`:
//!
//! ```text
//! summary.json                          every run, sorted
//! g2_<γ₂>/diagnostics.json
//! g2_<γ₂>/<method>/seed<s>.csv          trace
//! g2_<γ₂>/<method>/seed<s>.tune.json    tuning candidates (when tuning)
//! g2_<γ₂>/<method>/seed<s>.json         per-run summary
//! ```
//!
//! Checkpoint suboptimalities are interpolated linearly in `log10` of the
//! relative suboptimality between the two trace rows bracketing the epoch.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use curvlasso::baselines::correlation_lambda_max;
use curvlasso::data::{column_scale, generate_synthetic, Problem};
use curvlasso::hessian::{build_hessian, condition_report, smoothness_profile, ConditionReport, HessianModel, SmoothnessProfile};
use curvlasso::prox::subproblem_budget;
use curvlasso::sketch::{read_factors, sketch_problem, write_factors, LowRankFactors, SketchConfig};
use curvlasso::{DenseVector, EpochMeasure, MuMode, SolverTrace, SparseMatrix};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::datasets;
use crate::reference::{matrix_hash, reference_optimum, RefOptimum};
use crate::solvers::{Solver, SolverContext};
use crate::tune::{tune_step, TuneGrid, TuneResult};

pub const CHECKPOINTS: [f64; 6] = [1.0, 5.0, 10.0, 20.0, 50.0, 100.0];
/// Relative suboptimality floor (double-precision noise).
pub const SUBOPT_FLOOR: f64 = 1e-15;

/// Loads (and column-scales) the design matrix and targets of `cfg.dataset`.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(SparseMatrix, DenseVector)> {
    let (a, b) = match &cfg.dataset {
        DatasetSpec::Named(name) => datasets::load_any(name, &cfg.data_dir(), None)?,
        DatasetSpec::File { path, min_cols } => curvlasso::data::load_libsvm(path, *min_cols)
            .with_context(|| format!("loading {}", path.display()))?,
        DatasetSpec::Synthetic { synthetic } => {
            let p = generate_synthetic(synthetic)?;
            (p.a, p.b)
        }
    };
    Ok((column_scale(&a, cfg.scaling), b))
}

/// Sketch of `A/√n`, read from / written to `cache_dir` when given.
pub fn cached_sketch(problem: &Problem, sc: &SketchConfig, cache_dir: Option<&Path>) -> Result<LowRankFactors> {
    let file = cache_dir.map(|dir| {
        let h = matrix_hash(&problem.a);
        dir.join(format!(
            "sketch-{}-r{}-q{}-s{}.clrf",
            &h[..16],
            sc.rank,
            sc.power_iters(problem.d()),
            sc.seed
        ))
    });
    if let Some(f) = &file {
        if let Ok(fh) = File::open(f) {
            if let Ok(mut factors) = read_factors(std::io::BufReader::new(fh)) {
                factors.rank_deficient = factors.rank() < sc.rank;
                log::debug!("sketch cache hit {}", f.display());
                return Ok(factors);
            }
        }
    }
    let factors = sketch_problem(problem, sc)?;
    if let Some(f) = &file {
        fs::create_dir_all(f.parent().expect("cache file has a parent"))?;
        let tmp = f.with_extension("part");
        write_factors(BufWriter::new(File::create(&tmp)?), &factors)?;
        fs::rename(&tmp, f)?;
    }
    Ok(factors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rank: usize,
    pub rank_deficient: bool,
    pub sketch_seed: u64,
    pub power_iters: usize,
    pub report: ConditionReport,
    pub mu_hat: f64,
    pub l_avg: f64,
    pub l_max: f64,
    /// `λ₁(C)`, from power iteration.
    pub lambda_max: f64,
    pub subproblem_iters: usize,
    pub f_star: Option<f64>,
    pub f_star_certified: Option<bool>,
    pub f_star_certificate: Option<f64>,
}

pub struct Prepared {
    pub problem: Problem,
    pub hessian: HessianModel,
    pub profile: SmoothnessProfile,
    pub lambda_max: f64,
    pub diagnostics: Diagnostics,
}

/// Builds `H`, the sampling profile and the diagnostics for one `γ₂`.
pub fn prepare(
    label: &str,
    problem: Problem,
    factors: &LowRankFactors,
    sc: &SketchConfig,
    mu_mode: MuMode,
) -> Result<Prepared> {
    let hessian = build_hessian(factors, problem.gamma2)?;
    let profile = smoothness_profile(&problem, &hessian, mu_mode)?;
    let report = condition_report(&problem, &hessian, &profile)?;
    let lambda_max = correlation_lambda_max(&problem, sc.seed)?;
    // the default accel-svrg setting, for reporting only
    let rho = 0.9 * (profile.mu_hat / (2.0 * profile.l_avg)).sqrt();
    let budget = subproblem_budget(&hessian, 1.0 / profile.l_avg, rho.min(0.9))?;
    let diagnostics = Diagnostics {
        dataset: label.to_string(),
        n: problem.n(),
        d: problem.d(),
        gamma1: problem.gamma1,
        gamma2: problem.gamma2,
        rank: factors.rank(),
        rank_deficient: factors.rank_deficient,
        sketch_seed: sc.seed,
        power_iters: sc.power_iters(problem.d()),
        report,
        mu_hat: profile.mu_hat,
        l_avg: profile.l_avg,
        l_max: profile.l_max,
        lambda_max,
        subproblem_iters: budget.iters,
        f_star: None,
        f_star_certified: None,
        f_star_certificate: None,
    };
    Ok(Prepared {
        problem,
        hessian,
        profile,
        lambda_max,
        diagnostics,
    })
}

impl Prepared {
    pub fn context(&self, cfg: &ExperimentConfig) -> SolverContext<'_> {
        SolverContext {
            problem: &self.problem,
            hessian: &self.hessian,
            profile: &self.profile,
            lambda_max: self.lambda_max,
            batch: cfg.batch,
            epoch_measure: cfg.epoch_measure,
            budget_multiplier: cfg.budget_multiplier,
            wall_clock: cfg.wall_clock,
        }
    }
}

/// `max((F − F⋆)/|F⋆|, floor)`; absolute when `F⋆ = 0`.
pub fn relative_suboptimality(f: f64, f_star: f64) -> f64 {
    let scale = if f_star == 0.0 { 1.0 } else { f_star.abs() };
    ((f - f_star) / scale).max(SUBOPT_FLOOR)
}

/// Relative suboptimality at `epoch`, interpolated in log space between the
/// bracketing trace rows; `None` if the trace ends before `epoch`.
pub fn suboptimality_at(trace: &SolverTrace, f_star: f64, epoch: f64, measure: EpochMeasure) -> Option<f64> {
    let rows = &trace.rows;
    let last = rows.last()?;
    let last_e = trace.measure(last, measure);
    if epoch > last_e + 1e-9 {
        return None;
    }
    let k = rows.iter().position(|r| trace.measure(r, measure) >= epoch - 1e-9)?;
    let s_k = relative_suboptimality(rows[k].objective, f_star);
    if k == 0 {
        return Some(s_k);
    }
    let (e0, e1) = (trace.measure(&rows[k - 1], measure), trace.measure(&rows[k], measure));
    if e1 <= e0 || epoch >= e1 {
        return Some(s_k);
    }
    let s0 = relative_suboptimality(rows[k - 1].objective, f_star).log10();
    let t = ((epoch - e0) / (e1 - e0)).clamp(0.0, 1.0);
    Some(10f64.powf(s0 + t * (s_k.log10() - s0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub gamma1: f64,
    pub gamma2: f64,
    pub method: Solver,
    pub seed: u64,
    pub step: Option<f64>,
    pub step_multiplier: Option<f64>,
    pub f_star: f64,
    pub final_objective: Option<f64>,
    pub final_suboptimality: Option<f64>,
    pub epochs_run: f64,
    /// Keyed by epoch (`"1"`, `"5"`, …).
    pub checkpoints: BTreeMap<String, Option<f64>>,
    /// `"ok"`, `"diverged"` or `"error"`.
    pub status: String,
    pub message: Option<String>,
    pub warnings: Vec<String>,
    /// Relative to the dataset's output directory.
    pub trace_file: Option<PathBuf>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    trace
        .write_csv(BufWriter::new(File::create(path)?))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn gamma_dir(root: &Path, gamma2: f64) -> PathBuf {
    root.join(format!("g2_{gamma2:e}"))
}

/// Tunes the step of `solver` (or takes its theoretical step) and runs the full budget.
fn run_one(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    f_star: f64,
    solver: Solver,
    seed: u64,
    root: &Path,
    rel_dir: &Path,
) -> Result<RunSummary> {
    let dir = root.join(rel_dir);
    let ctx = prep.context(cfg);
    let p = &prep.problem;
    let mut summary = RunSummary {
        dataset: prep.diagnostics.dataset.clone(),
        gamma1: p.gamma1,
        gamma2: p.gamma2,
        method: solver,
        seed,
        step: None,
        step_multiplier: None,
        f_star,
        final_objective: None,
        final_suboptimality: None,
        epochs_run: 0.0,
        checkpoints: BTreeMap::new(),
        status: "error".into(),
        message: None,
        warnings: Vec::new(),
        trace_file: None,
    };
    let base = ctx.theoretical_step(solver)?;
    let step = if cfg.tune {
        let tuned: Result<TuneResult> = tune_step(&TuneGrid::default(), base, |s| {
            ctx.run(solver, Some(s), cfg.tune_epochs, seed)
                .map(|(x, _)| p.objective(x.as_slice()))
        });
        match tuned {
            Ok(t) => {
                write_json(&dir.join(format!("seed{seed}.tune.json")), &t)?;
                summary.step_multiplier = Some(t.multiplier);
                t.step
            }
            Err(e) => {
                summary.message = Some(format!("{e:#}"));
                write_json(&dir.join(format!("seed{seed}.json")), &summary)?;
                return Ok(summary);
            }
        }
    } else {
        summary.step_multiplier = Some(1.0);
        base
    };
    summary.step = Some(step);

    let trace = match ctx.run(solver, Some(step), cfg.epochs, seed) {
        Ok((_, trace)) => {
            summary.status = "ok".into();
            trace
        }
        Err(curvlasso::Error::Diverged { outer, inner, trace }) => {
            summary.status = "diverged".into();
            summary.message = Some(format!("diverged at stage {outer}, step {inner}"));
            *trace
        }
        Err(e) => {
            summary.message = Some(e.to_string());
            write_json(&dir.join(format!("seed{seed}.json")), &summary)?;
            return Ok(summary);
        }
    };
    let csv = dir.join(format!("seed{seed}.csv"));
    write_trace(&csv, &trace)?;
    summary.trace_file = Some(rel_dir.join(format!("seed{seed}.csv")));
    summary.warnings = trace.warnings.clone();
    if let Some(last) = trace.last() {
        summary.epochs_run = trace.measure(last, cfg.epoch_measure);
        if summary.status == "ok" {
            summary.final_objective = Some(last.objective);
            summary.final_suboptimality = Some(relative_suboptimality(last.objective, f_star));
        }
    }
    for e in CHECKPOINTS {
        summary
            .checkpoints
            .insert(format!("{e}"), suboptimality_at(&trace, f_star, e, cfg.epoch_measure));
    }
    write_json(&dir.join(format!("seed{seed}.json")), &summary)?;
    Ok(summary)
}

/// Runs the full protocol. Individual solver failures are recorded in the
/// summaries (and on disk) rather than aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let label = cfg.dataset.label();
    let root = cfg.output_dir.join(&label);
    let cache = cfg.cache_dir();
    let gamma1 = cfg.resolved_gamma1()?;
    let rank = cfg.resolved_rank()?;
    let (a, b) = load_data(cfg)?;

    let sc = SketchConfig {
        rank,
        eps_prime: cfg.eps_prime,
        q_override: cfg.q_override,
        seed: cfg.sketch_seed,
    };
    let gammas2 = cfg.resolved_gamma2()?;
    let base = Problem::new(a, b, gamma1, gammas2[0])?;
    let factors = cached_sketch(&base, &sc, Some(&cache))?;
    if factors.rank_deficient {
        log::warn!("sketch returned rank {} < requested {rank}", factors.rank());
    }

    let mut all = Vec::new();
    for gamma2 in gammas2 {
        let problem = base.with_regularization(gamma1, gamma2)?;
        let mut prep = prepare(&label, problem, &factors, &sc, cfg.mu_mode)?;
        let gdir = gamma_dir(&root, gamma2);
        let reference: RefOptimum = reference_optimum(&prep.problem, cfg.reference_tol, cfg.sketch_seed, Some(&cache))?;
        prep.diagnostics.f_star = Some(reference.f_star);
        prep.diagnostics.f_star_certified = Some(reference.certified);
        prep.diagnostics.f_star_certificate = Some(reference.certificate);
        write_json(&gdir.join("diagnostics.json"), &prep.diagnostics)?;

        let jobs: Vec<(Solver, u64)> = cfg
            .methods
            .iter()
            .flat_map(|m| cfg.seeds.iter().map(move |s| (*m, *s)))
            .collect();
        let results: Vec<Result<RunSummary>> = jobs
            .par_iter()
            .map(|&(m, s)| {
                let rel = gamma_dir(Path::new(""), gamma2).join(m.name());
                log::info!("{label} γ₂={gamma2:e} {m} seed {s}");
                run_one(cfg, &prep, reference.f_star, m, s, &root, &rel)
                    .with_context(|| format!("{label} γ₂={gamma2:e} {m} seed {s}"))
            })
            .collect();
        for r in results {
            all.push(r?);
        }
    }
    all.sort_by(|x, y| {
        (x.gamma2, x.method, x.seed)
            .partial_cmp(&(y.gamma2, y.method, y.seed))
            .expect("finite gamma2")
    });
    write_json(&root.join("summary.json"), &all)?;
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use curvlasso::TraceRow;

    fn row(epoch_evals: u64, objective: f64) -> TraceRow {
        TraceRow {
            outer: 0,
            inner: 0,
            epoch: epoch_evals as f64 / 10.0,
            objective,
            grad_evals: epoch_evals,
            sub_iters: 0,
            wall_ns: 0,
        }
    }

    #[test]
    fn checkpoint_interpolation_is_log_linear() {
        let mut t = SolverTrace::new(10, 1);
        t.push(row(0, 1.0 + 1e-2));
        t.push(row(20, 1.0 + 1e-6));
        let mid = suboptimality_at(&t, 1.0, 1.0, EpochMeasure::DataPasses).unwrap();
        assert!((mid.log10() + 4.0).abs() < 1e-9, "{mid}");
        assert_eq!(
            suboptimality_at(&t, 1.0, 2.0, EpochMeasure::DataPasses),
            Some(relative_suboptimality(1.0 + 1e-6, 1.0))
        );
        assert_eq!(suboptimality_at(&t, 1.0, 3.0, EpochMeasure::DataPasses), None);
    }

    #[test]
    fn floor_applies() {
        assert_eq!(relative_suboptimality(1.0, 1.0), SUBOPT_FLOOR);
        assert_eq!(relative_suboptimality(0.5, 1.0), SUBOPT_FLOOR);
    }
}
