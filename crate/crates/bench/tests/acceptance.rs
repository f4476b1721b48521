//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! (visible with `--nocapture`, and in the failure message otherwise).

use std::path::PathBuf;
use std::time::{Duration, Instant};

use curvlasso::data::{generate_synthetic, SyntheticSpec};
use curvlasso::hessian::{build_hessian, condition_report, correlation_dense, lemma1_spectral_check, smoothness_profile};
use curvlasso::linalg::{dense_svd, sym_eigen};
use curvlasso::prox::{oracle_scaled_prox, SubproblemSpec, ORACLE_TOL};
use curvlasso::sketch::{approximation_error, block_lanczos, per_vector_error_stat, sketch_problem};
use curvlasso::svrg::{self, inner_step, minibatch_gradient, SolverState};
use curvlasso::{rng, DenseVector, MuMode, Problem, Sampling, SketchConfig, SolverConfig, SparseMatrix};
use curvlasso_bench::config::{DatasetSpec, ExperimentConfig};
use curvlasso_bench::datasets;
use curvlasso_bench::experiment::{prepare, relative_suboptimality, run_experiment};
use curvlasso_bench::reference::{reference_optimum, subgradient_violation, DEFAULT_TOL};
use curvlasso_bench::solvers::Solver;
use curvlasso_bench::spectrum::{head_ratio, spectrum};

fn report(n: usize, what: &str, pass: bool, detail: String) {
    let line = format!("criterion {n} [PRIMARY] {what}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    println!("{line}");
    assert!(pass, "{line}");
}

fn synthetic(n: usize, d: usize, scale: f64, decay: f64, gamma1: f64, gamma2: f64, seed: u64) -> Problem {
    let spec = SyntheticSpec::power_law(n, d, scale, decay, seed)
        .with_regularization(gamma1, gamma2)
        .with_noise(0.1);
    generate_synthetic(&spec).unwrap()
}

fn data_dir() -> PathBuf {
    std::env::var_os(datasets::DATA_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data"))
}

fn australian(gamma2: f64) -> Problem {
    let info = datasets::lookup("australian").unwrap();
    let (a, b) = datasets::load_named(info, &data_dir()).unwrap();
    Problem::new(a, b, info.gamma1, gamma2).unwrap()
}

/// `(C + γ₂I)⁻¹Aᵀb/n` through the dense eigendecomposition of `C`.
fn ridge_closed_form(p: &Problem) -> Vec<f64> {
    let eig = sym_eigen(&correlation_dense(p));
    let n = p.n() as f64;
    let rhs: Vec<f64> = p.a.matvec_t(p.b.as_slice()).unwrap().iter().map(|v| v / n).collect();
    let mut x = vec![0.0; p.d()];
    for (k, lam) in eig.values.iter().enumerate() {
        let v = eig.vectors.col(k);
        let c: f64 = v.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / (lam + p.gamma2);
        x.iter_mut().zip(&v).for_each(|(xj, vj)| *xj += c * vj);
    }
    x
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[test]
fn criterion_01_ridge_reduction() {
    let start = Instant::now();
    let p = synthetic(20, 10, 1.0, 1.0, 0.0, 1e-2, 1);
    let f = sketch_problem(&p, &SketchConfig::new(10, 0)).unwrap();
    let h = build_hessian(&f, p.gamma2).unwrap();
    let profile = smoothness_profile(&p, &h, MuMode::Exact).unwrap();
    let cfg = SolverConfig {
        max_epochs: Some(300.0),
        ..Default::default()
    };
    let (x, _) = svrg::run(&p, &h, &profile, &cfg).unwrap();
    let want = ridge_closed_form(&p);
    let err = x.sub(&want).norm() / DenseVector::from_vec(want).norm();
    let t = start.elapsed();
    report(
        1,
        "ridge reduction",
        err <= 1e-6 && t < Duration::from_secs(5),
        format!("relative error {err:.2e}, {:.2}s", t.as_secs_f64()),
    );
}

#[test]
fn criterion_02_block_lanczos_guarantee() {
    let start = Instant::now();
    let (mut spectral_ok, mut per_vector_ok) = (0, 0);
    let r = 10;
    for trial in 0..100u64 {
        let p = synthetic(200, 100, 1.0, 1.0, 0.0, 1e-3, 1000 + trial);
        let m = SparseMatrix::from_dense(&p.a.to_dense().scaled(1.0 / (p.n() as f64).sqrt()));
        let svd = dense_svd(&m.to_dense());
        let next = svd.s[r];
        let f = block_lanczos(&m, &SketchConfig::new(r, trial)).unwrap();
        if approximation_error(&m, &f, trial).unwrap() <= 1.5 * next {
            spectral_ok += 1;
        }
        let gaps = per_vector_error_stat(&m, &f, &svd).unwrap();
        if gaps.iter().all(|g| *g <= 0.5 * next * next) {
            per_vector_ok += 1;
        }
    }
    let t = start.elapsed();
    report(
        2,
        "block Lanczos guarantee",
        spectral_ok >= 90 && per_vector_ok >= 90 && t < Duration::from_secs(60),
        format!(
            "spectral {spectral_ok}/100, per-vector {per_vector_ok}/100, {:.1}s",
            t.as_secs_f64()
        ),
    );
}

/// Random small problems for criteria 3 and 4: `(problem, rank)`.
fn small_problems(count: u64, seed0: u64) -> impl Iterator<Item = (Problem, usize, u64)> {
    (0..count).map(move |t| {
        let mut r = rng::stream(seed0, t);
        let d = 10 + rng::uniform_index(&mut r, 91);
        let n = d + 20 + rng::uniform_index(&mut r, 200);
        let rank = 1 + rng::uniform_index(&mut r, d.min(10));
        let decay = 0.5 + 1.5 * rng::uniform(&mut r);
        let gamma2 = 10f64.powf(-1.0 - 3.0 * rng::uniform(&mut r));
        (synthetic(n, d, 1.0, decay, 1e-3, gamma2, seed0 + t), rank, t)
    })
}

#[test]
fn criterion_03_lemma1_spectral_bounds() {
    let mut ok = 0;
    let mut worst = (0.0f64, f64::INFINITY);
    for (p, rank, t) in small_problems(100, 3000) {
        let f = sketch_problem(&p, &SketchConfig::new(rank, t)).unwrap();
        let h = build_hessian(&f, p.gamma2).unwrap();
        let (hi, lo) = lemma1_spectral_check(&p, &h).unwrap();
        let lam_r = h.sig2()[h.rank() - 1];
        let floor = p.gamma2 / (19.0 * (lam_r + p.gamma2));
        worst = (worst.0.max(hi), worst.1.min(lo / floor));
        if hi <= 17.0 && floor <= lo && lo <= 2.0 {
            ok += 1;
        }
    }
    report(
        3,
        "spectral bounds of the preconditioned correlation",
        ok >= 90,
        format!("{ok}/100 trials; max λ_max {:.3}, min λ_min/floor {:.2}", worst.0, worst.1),
    );
}

#[test]
fn criterion_04_condition_number_bound() {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for (p, rank, t) in small_problems(50, 4000) {
        let f = sketch_problem(&p, &SketchConfig::new(rank, t)).unwrap();
        let h = build_hessian(&f, p.gamma2).unwrap();
        let profile = smoothness_profile(&p, &h, MuMode::Exact).unwrap();
        let rep = condition_report(&p, &h, &profile).unwrap();
        let ratio = rep.kappa_h / rep.theorem1_bound;
        worst = worst.max(ratio);
        if ratio <= 20.0 {
            ok += 1;
        }
    }
    report(
        4,
        "condition-number diagnostic",
        ok >= 45,
        format!("{ok}/50 within 20x the bound; worst κ_H/bound {worst:.3}"),
    );
}

#[test]
fn criterion_05_outer_loop_contraction() {
    let p = synthetic(2000, 200, 2.5, 1.0, 1e-4, 1e-3, 5);
    let f = sketch_problem(&p, &SketchConfig::new(10, 0)).unwrap();
    let h = build_hessian(&f, p.gamma2).unwrap();
    let profile = smoothness_profile(&p, &h, MuMode::Auto).unwrap();
    let kappa_tilde = condition_report(&p, &h, &profile).unwrap().kappa_tilde;
    let f_star = reference_optimum(&p, DEFAULT_TOL, 0, None).unwrap().f_star;
    // below this the gap is rounding noise
    let floor = 1e-12 * f_star.abs().max(1.0);

    let stages = 8;
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); stages];
    for seed in 0..20 {
        let cfg = SolverConfig {
            batch: Some((p.n() as f64).sqrt().round() as usize),
            outer_iters: Some(stages),
            max_epochs: None,
            seed,
            ..Default::default()
        };
        let (_, trace) = svrg::run(&p, &h, &profile, &cfg).unwrap();
        let mut gaps = vec![trace.rows[0].objective - f_star];
        for s in 0..stages {
            let last = trace.rows.iter().rev().find(|r| r.outer == s).unwrap();
            gaps.push(last.objective - f_star);
        }
        for s in 0..stages {
            if gaps[s] > floor {
                ratios[s].push(gaps[s + 1].max(0.0) / gaps[s]);
            }
        }
    }
    let medians: Vec<f64> = ratios.iter().filter(|r| r.len() >= 10).map(|r| median(r.clone())).collect();
    let worst = medians.iter().copied().fold(0.0, f64::max);
    report(
        5,
        "outer-loop contraction",
        !medians.is_empty() && worst <= 0.9,
        format!(
            "κ̃ {kappa_tilde:.2e}; median stage ratios {:?}; worst {worst:.3}",
            medians.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_06_warm_start_budget_sufficiency() {
    let p = synthetic(400, 50, 2.0, 1.0, 1e-3, 1e-3, 6);
    let f = sketch_problem(&p, &SketchConfig::new(5, 0)).unwrap();
    let h = build_hessian(&f, p.gamma2).unwrap();
    let profile = smoothness_profile(&p, &h, MuMode::Exact).unwrap();
    let cfg = SolverConfig {
        batch: Some(20),
        seed: 3,
        ..Default::default()
    };
    let (params, _) = cfg.resolve(&p, &h, &profile).unwrap();
    let kappa = h.kappa_sub();
    let factor = (1.0 - params.rho) / kappa;
    let mut state = SolverState::new(DenseVector::zeros(p.d()), cfg.seed);
    let (mut total, mut ok) = (0, 0);
    let mut worst = 0.0f64;
    for _stage in 0..3 {
        state.begin_stage(&p).unwrap();
        for _ in 0..params.epoch_len {
            let first = state.outer == 0 && state.inner == 0;
            let step = inner_step(&mut state, &p, &h, &profile, &params).unwrap();
            let spec = SubproblemSpec::new(step.u.as_slice(), params.eta, &h, p.gamma1).unwrap();
            let oracle = oracle_scaled_prox(&spec, ORACLE_TOL).unwrap();
            assert!(oracle.converged);
            let p_star = spec.value(oracle.z.as_slice()).unwrap();
            let z0 = step.z0.expect("budget mode");
            let gap0 = spec.value(z0.as_slice()).unwrap() - p_star;
            let gap = spec.value(state.x.as_slice()).unwrap() - p_star;
            // rounding in p itself
            let slack = 1e-13 * p_star.abs().max(1.0);
            if first {
                continue;
            }
            total += 1;
            if gap <= factor * gap0 + slack {
                ok += 1;
            }
            if gap0 > slack {
                worst = worst.max(gap / (factor * gap0));
            }
        }
        state.end_stage();
    }
    report(
        6,
        "warm start + fixed budget sufficiency",
        ok == total && total > 0,
        format!("{ok}/{total} subproblems; worst gap/allowed {worst:.3e}; κ_sub {kappa:.1}, {} iterations", params.budget.iters),
    );
}

#[test]
fn criterion_07_estimator_unbiasedness() {
    let p = synthetic(100, 20, 1.0, 1.0, 1e-3, 1e-2, 7);
    let f = sketch_problem(&p, &SketchConfig::new(4, 0)).unwrap();
    let h = build_hessian(&f, p.gamma2).unwrap();
    let profile = smoothness_profile(&p, &h, MuMode::Exact).unwrap();
    let mut r = rng::seeded(70);
    let x_tilde = rng::gaussian_vec(&mut r, 20);
    let y = rng::gaussian_vec(&mut r, 20);
    let full = p.full_gradient(&x_tilde).unwrap();
    let want = p.full_gradient(&y).unwrap();
    let draws = 100_000;
    let mut details = Vec::new();
    let mut pass = true;
    for sampling in [Sampling::Nonuniform, Sampling::Uniform] {
        let mut sum = vec![0.0; 20];
        let mut sq = vec![0.0; 20];
        for _ in 0..draws {
            let v = minibatch_gradient(&p, &profile, sampling, &y, &x_tilde, full.as_slice(), 4, &mut r).unwrap();
            for j in 0..20 {
                sum[j] += v[j];
                sq[j] += v[j] * v[j];
            }
        }
        let mut worst = 0.0f64;
        for j in 0..20 {
            let mean = sum[j] / draws as f64;
            let var = (sq[j] / draws as f64 - mean * mean).max(0.0) * draws as f64 / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            let z = (mean - want[j]).abs() / se.max(1e-300);
            worst = worst.max(z);
        }
        pass &= worst <= 4.0;
        details.push(format!("{sampling:?}: max |z| {worst:.2}"));
    }
    report(7, "estimator unbiasedness", pass, details.join(", "));
}

#[test]
fn criterion_08_australian_reproduction() {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(DatasetSpec::Named("australian".into()));
    cfg.data_dir = Some(data_dir());
    cfg.output_dir = out.path().to_path_buf();
    let runs = run_experiment(&cfg).unwrap();
    let at100 = |g2: f64, m: Solver| {
        runs.iter()
            .find(|r| r.gamma2 == g2 && r.method == m)
            .and_then(|r| r.checkpoints.get("100").copied().flatten())
            .unwrap_or(f64::INFINITY)
    };
    let mut any = false;
    let mut details = Vec::new();
    for g2 in cfg.resolved_gamma2().unwrap() {
        let (ours, svrg, fista) = (
            at100(g2, Solver::AccelSvrg),
            at100(g2, Solver::ProxSvrg),
            at100(g2, Solver::Fista),
        );
        let holds = ours <= 1e-4 * svrg && ours < fista;
        any |= holds;
        details.push(format!(
            "γ₂={g2:e}: ours {ours:.2e}, prox_svrg {svrg:.2e}, fista {fista:.2e}, katyusha1 {:.2e}",
            at100(g2, Solver::Katyusha1)
        ));
    }
    let t = start.elapsed();
    details.push(format!("{:.1}s", t.as_secs_f64()));
    report(8, "australian reproduction", any && t < Duration::from_secs(120), details.join("; "));
}

#[test]
fn criterion_09_spectral_ratio() {
    let p = australian(1e-3);
    let lambdas = spectrum(&p, 3, 0).unwrap();
    let ratio = head_ratio(&lambdas, 3).unwrap();
    report(
        9,
        "spectral ratio on australian",
        (1e3..=1e5).contains(&ratio),
        format!("Σλ/(rλ_r) at r=3 = {ratio:.4e}; λ = {lambdas:?}"),
    );
}

#[test]
fn criterion_10_optimum_consensus() {
    let instances = [
        synthetic(100, 10, 1.0, 1.0, 1e-2, 1e-2, 10),
        synthetic(200, 20, 1.5, 0.8, 5e-3, 1e-2, 11),
        synthetic(150, 30, 1.0, 0.5, 1e-3, 5e-2, 12),
        synthetic(300, 15, 2.0, 1.5, 2e-2, 1e-2, 13),
    ];
    let cfg = ExperimentConfig::new(DatasetSpec::Named("synthetic".into()));
    let mut pass = true;
    let mut details = Vec::new();
    for (k, p) in instances.into_iter().enumerate() {
        let sc = SketchConfig::new(4, 0);
        let f = sketch_problem(&p, &sc).unwrap();
        let prep = prepare("synthetic", p, &f, &sc, MuMode::Auto).unwrap();
        let ctx = prep.context(&cfg);
        let finals: Vec<(Solver, DenseVector, f64)> = Solver::DEFAULT_SET
            .iter()
            .map(|&s| {
                let (x, _) = ctx.run(s, None, 10000.0, 0).unwrap();
                let obj = prep.problem.objective(x.as_slice());
                (s, x, obj)
            })
            .collect();
        let best = finals.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
        let spread = finals
            .iter()
            .map(|(_, _, o)| relative_suboptimality(*o, best.2))
            .fold(0.0, f64::max);
        let viol = subgradient_violation(&prep.problem, best.1.as_slice()).unwrap();
        pass &= spread <= 1e-6 && viol <= 1e-6;
        details.push(format!("#{k}: spread {spread:.1e}, certificate {viol:.1e}"));
    }
    report(10, "cross-solver optimum consensus", pass, details.join("; "));
}
