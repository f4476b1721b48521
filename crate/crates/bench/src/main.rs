use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use curvlasso::data::{ColumnScaling, Problem};
use curvlasso::sketch::{sketch_problem, write_factors, SketchConfig};
use curvlasso::MuMode;
use curvlasso_bench::config::{DatasetSpec, ExperimentConfig};
use curvlasso_bench::datasets::{self, FetchOutcome, DATA_ENV};
use curvlasso_bench::experiment::{prepare, run_experiment};
use curvlasso_bench::reference::{reference_optimum, DEFAULT_TOL};
use curvlasso_bench::solvers::Solver;
use curvlasso_bench::spectrum::emit_spectrum;
use curvlasso_bench::tune::{tune_step, TuneGrid};

/// Sketched-curvature elastic-net solvers: benchmark harness.
///
/// Named datasets are looked up in $CURVLASSO_DATA (default ./data).
#[derive(Parser)]
#[command(name = "curvlasso", version, about, long_about = None)]
struct Cli {
    /// Worker threads for concurrent runs (default: all cores).
    #[arg(long, short = 'j', global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Download registered datasets into the data directory.
    Fetch {
        /// Dataset names; all registered datasets when omitted.
        names: Vec<String>,
        #[arg(long, env = DATA_ENV)]
        data_dir: Option<PathBuf>,
        /// Download again even if the file exists.
        #[arg(long)]
        force: bool,
    },
    /// Compute the rank-r factors of A/√n and write them in CLRF1 format.
    Sketch {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        eps_prime: f64,
        /// Override the number of power iterations.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Print the condition-number diagnostics as JSON.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        reg: RegArgs,
        #[arg(long, short)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How μ̂ is computed: auto, exact or bound.
        #[arg(long, default_value = "auto")]
        mu: String,
        /// Also compute the reference optimum F⋆.
        #[arg(long)]
        reference: bool,
    },
    /// Tune the step of one method over the 15-point grid and print the candidates as JSON.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        reg: RegArgs,
        #[arg(long, short)]
        rank: Option<usize>,
        #[arg(long, short)]
        method: Solver,
        /// Short budget, in epochs.
        #[arg(long, default_value_t = 20.0)]
        epochs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a full experiment described by a TOML config.
    Bench {
        #[arg(long, short)]
        config: PathBuf,
        /// Override the subproblem budget multiplier.
        #[arg(long)]
        budget_multiplier: Option<f64>,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write the leading eigenvalues of C = AᵀA/n as an `index,lambda` CSV.
    Spectrum {
        #[command(flatten)]
        data: DataArgs,
        /// Number of eigenvalues (default: min(n, d, 100)).
        #[arg(long)]
        r_probe: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Registered dataset name or path to a LIBSVM file.
    dataset: String,
    #[arg(long, env = DATA_ENV)]
    data_dir: Option<PathBuf>,
    /// Column scaling applied after loading: none or unit_norm.
    #[arg(long, default_value = "none")]
    scaling: String,
}

#[derive(Args)]
struct RegArgs {
    /// ℓ₁ weight (default: the dataset's reference value).
    #[arg(long)]
    gamma1: Option<f64>,
    /// ℓ₂ weight (default: gamma1).
    #[arg(long)]
    gamma2: Option<f64>,
}

impl DataArgs {
    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(DatasetSpec::Named(self.dataset.clone()));
        if datasets::lookup(&self.dataset).is_none() {
            cfg.dataset = DatasetSpec::File {
                path: PathBuf::from(&self.dataset),
                min_cols: None,
            };
        }
        cfg.data_dir = self.data_dir.clone();
        cfg.scaling = match self.scaling.as_str() {
            "none" => ColumnScaling::None,
            "unit_norm" | "unit-norm" => ColumnScaling::UnitNorm,
            other => bail!("unknown scaling {other:?} (expected none or unit_norm)"),
        };
        Ok(cfg)
    }

    fn problem(&self, reg: Option<&RegArgs>) -> Result<(ExperimentConfig, Problem)> {
        let mut cfg = self.experiment_config()?;
        let (a, b) = curvlasso_bench::experiment::load_data(&cfg)?;
        let (g1, g2) = match reg {
            Some(r) => {
                cfg.gamma1 = r.gamma1;
                let g1 = cfg.resolved_gamma1()?;
                (g1, r.gamma2.unwrap_or(g1))
            }
            // the sketch and the spectrum do not depend on the regularization
            None => (0.0, 1.0),
        };
        if g2 <= 0.0 {
            bail!("gamma2 must be > 0 (pass --gamma2)");
        }
        Ok((cfg, Problem::new(a, b, g1, g2)?))
    }
}

fn rank_for(cfg: &mut ExperimentConfig, rank: Option<usize>) -> Result<usize> {
    cfg.rank = rank.or(cfg.rank);
    cfg.resolved_rank().context("pass --rank")
}

fn parse_mu(s: &str) -> Result<MuMode> {
    Ok(match s {
        "auto" => MuMode::Auto,
        "exact" => MuMode::Exact,
        "bound" => MuMode::Bound,
        other => match other.parse::<f64>() {
            Ok(v) => MuMode::Override(v),
            Err(_) => bail!("unknown mu mode {other:?} (expected auto, exact, bound or a number)"),
        },
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.cmd {
        Cmd::Fetch { names, data_dir, force } => {
            let dir = data_dir.unwrap_or_else(datasets::data_dir);
            let infos: Vec<_> = if names.is_empty() {
                datasets::DATASETS.iter().collect()
            } else {
                names
                    .iter()
                    .map(|n| datasets::lookup(n).with_context(|| format!("unknown dataset {n:?}")))
                    .collect::<Result<_>>()?
            };
            for info in infos {
                match datasets::fetch(info, &dir, force)? {
                    FetchOutcome::Downloaded(p) => println!("{}: downloaded to {}", info.name, p.display()),
                    FetchOutcome::AlreadyPresent(p) => println!("{}: already present at {}", info.name, p.display()),
                    FetchOutcome::Manual(msg) => println!("{}: {msg}", info.name),
                }
            }
        }
        Cmd::Sketch { data, rank, eps_prime, q, seed, output } => {
            let (mut cfg, problem) = data.problem(None)?;
            let sc = SketchConfig {
                rank: rank_for(&mut cfg, rank)?,
                eps_prime,
                q_override: q,
                seed,
            };
            let f = sketch_problem(&problem, &sc)?;
            if let Some(parent) = output.parent() {
                fs::create_dir_all(parent)?;
            }
            write_factors(BufWriter::new(File::create(&output)?), &f)?;
            let lambdas: Vec<f64> = f.sigma.iter().map(|s| s * s).collect();
            eprintln!(
                "rank {} (deficient: {}), q = {}, λ = {:?}",
                f.rank(),
                f.rank_deficient,
                sc.power_iters(problem.d()),
                lambdas
            );
        }
        Cmd::Diagnose { data, reg, rank, seed, mu, reference } => {
            let (mut cfg, problem) = data.problem(Some(&reg))?;
            let sc = SketchConfig::new(rank_for(&mut cfg, rank)?, seed);
            let f = sketch_problem(&problem, &sc)?;
            let mut prep = prepare(&cfg.dataset.label(), problem, &f, &sc, parse_mu(&mu)?)?;
            if reference {
                let r = reference_optimum(&prep.problem, DEFAULT_TOL, seed, None)?;
                prep.diagnostics.f_star = Some(r.f_star);
                prep.diagnostics.f_star_certified = Some(r.certified);
                prep.diagnostics.f_star_certificate = Some(r.certificate);
            }
            println!("{}", serde_json::to_string_pretty(&prep.diagnostics)?);
        }
        Cmd::Tune { data, reg, rank, method, epochs, seed } => {
            let (mut cfg, problem) = data.problem(Some(&reg))?;
            let sc = SketchConfig::new(rank_for(&mut cfg, rank)?, seed);
            let f = sketch_problem(&problem, &sc)?;
            let prep = prepare(&cfg.dataset.label(), problem, &f, &sc, MuMode::Auto)?;
            let ctx = prep.context(&cfg);
            let base = ctx.theoretical_step(method)?;
            let t = tune_step(&TuneGrid::default(), base, |s| {
                ctx.run(method, Some(s), epochs, seed)
                    .map(|(x, _)| prep.problem.objective(x.as_slice()))
            })?;
            println!("{}", serde_json::to_string_pretty(&t)?);
        }
        Cmd::Bench { config, budget_multiplier, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = budget_multiplier {
                cfg.budget_multiplier = m;
            }
            if let Some(o) = output_dir {
                cfg.output_dir = o;
            }
            let runs = run_experiment(&cfg)?;
            for r in &runs {
                let last = r.checkpoints.get("100").copied().flatten();
                println!(
                    "{} γ₂={:e} {:<11} seed {}: {} step={} subopt@100={}",
                    r.dataset,
                    r.gamma2,
                    r.method.name(),
                    r.seed,
                    r.status,
                    r.step.map_or("-".into(), |s| format!("{s:.3e}")),
                    last.map_or("-".into(), |s| format!("{s:.3e}")),
                );
            }
            println!("results in {}", cfg.output_dir.join(cfg.dataset.label()).display());
        }
        Cmd::Spectrum { data, r_probe, seed, output } => {
            let (_, problem) = data.problem(None)?;
            let r = r_probe.unwrap_or_else(|| problem.n().min(problem.d()).min(100));
            let csv = emit_spectrum(&problem, r, seed)?;
            match output {
                Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
