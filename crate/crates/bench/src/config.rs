//! TOML experiment configuration.
//!
//! ```toml
//! dataset = "australian"          # registry name, or { path = "...", min_cols = 14 },
//!                                 # or { synthetic = { n = .., d = .., spectrum = [..], noise_sigma = .., seed = .. } }
//! gamma1 = 1e-3                   # default: the dataset's reference value
//! gamma2 = [1e-3, 1e-4]           # default: [gamma1, 0.1 * gamma1]
//! rank = 5                        # default: the dataset's reference value
//! methods = ["accel_svrg", "fista", "prox_svrg", "katyusha1"]
//! epochs = 100.0
//! tune = true
//! tune_epochs = 20.0
//! seeds = [0]
//! output_dir = "results"
//! batch = "sqrt_n"                # or "theory", or { fixed = 32 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use curvlasso::data::{ColumnScaling, SyntheticSpec};
use curvlasso::{EpochMeasure, MuMode};

use crate::datasets;
use crate::reference::DEFAULT_TOL;
use crate::solvers::{BatchRule, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Named(String),
    File {
        path: PathBuf,
        #[serde(default)]
        min_cols: Option<usize>,
    },
    Synthetic { synthetic: SyntheticSpec },
}

impl DatasetSpec {
    /// Short name used for output directories.
    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Named(n) => datasets::lookup(n).map_or_else(|| n.clone(), |i| i.name.to_string()),
            DatasetSpec::File { path, .. } => path
                .file_stem()
                .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned()),
            DatasetSpec::Synthetic { synthetic } => {
                format!("synthetic-{}x{}-s{}", synthetic.n, synthetic.d, synthetic.seed)
            }
        }
    }

    pub fn registry(&self) -> Option<&'static datasets::DatasetInfo> {
        match self {
            DatasetSpec::Named(n) => datasets::lookup(n),
            _ => None,
        }
    }
}

fn default_methods() -> Vec<Solver> {
    Solver::DEFAULT_SET.to_vec()
}
fn default_epochs() -> f64 {
    100.0
}
fn default_tune_epochs() -> f64 {
    20.0
}
fn default_true() -> bool {
    true
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_eps_prime() -> f64 {
    0.5
}
fn default_multiplier() -> f64 {
    1.0
}
fn default_reference_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<Vec<f64>>,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Solver>,
    #[serde(default = "default_epochs")]
    pub epochs: f64,
    #[serde(default = "default_true")]
    pub tune: bool,
    /// Budget of each tuning run, in epochs.
    #[serde(default = "default_tune_epochs")]
    pub tune_epochs: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub batch: BatchRule,
    #[serde(default)]
    pub mu_mode: MuMode,
    #[serde(default)]
    pub sketch_seed: u64,
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
    #[serde(default)]
    pub q_override: Option<usize>,
    #[serde(default = "default_multiplier")]
    pub budget_multiplier: f64,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default)]
    pub scaling: ColumnScaling,
    /// Record wall-clock time in traces (makes outputs nondeterministic).
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default)]
    pub epoch_measure: EpochMeasure,
    /// Sketch and reference-optimum cache; default `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Where named datasets live; default `$CURVLASSO_DATA` or `./data`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        toml::from_str::<ExperimentConfig>("dataset = \"x\"")
            .map(|mut c| {
                c.dataset = dataset;
                c
            })
            .expect("defaults parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("methods must not be empty");
        }
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if !(self.epochs > 0.0) || !(self.tune_epochs > 0.0) {
            bail!("epochs and tune_epochs must be > 0");
        }
        if let Some(g) = &self.gamma2 {
            if g.is_empty() || g.iter().any(|v| !(*v > 0.0)) {
                bail!("gamma2 must be a non-empty list of positive values");
            }
        }
        if let Some(g) = self.gamma1 {
            if !(g >= 0.0) {
                bail!("gamma1 must be >= 0");
            }
        }
        if matches!(self.rank, Some(0)) {
            bail!("rank must be >= 1");
        }
        if let BatchRule::Fixed(0) = self.batch {
            bail!("fixed batch must be >= 1");
        }
        Ok(())
    }

    pub fn resolved_gamma1(&self) -> Result<f64> {
        if let Some(g) = self.gamma1 {
            return Ok(g);
        }
        match (&self.dataset, self.dataset.registry()) {
            (_, Some(info)) => Ok(info.gamma1),
            (DatasetSpec::Synthetic { synthetic }, _) => Ok(synthetic.gamma1),
            _ => bail!("gamma1 is required for datasets outside the registry"),
        }
    }

    pub fn resolved_gamma2(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.gamma2 {
            return Ok(g.clone());
        }
        let g1 = self.resolved_gamma1()?;
        if g1 > 0.0 {
            Ok(vec![g1, 0.1 * g1])
        } else if let DatasetSpec::Synthetic { synthetic } = &self.dataset {
            Ok(vec![synthetic.gamma2])
        } else {
            bail!("gamma2 is required when gamma1 = 0")
        }
    }

    pub fn resolved_rank(&self) -> Result<usize> {
        if let Some(r) = self.rank {
            return Ok(r);
        }
        match self.dataset.registry() {
            Some(info) => Ok(info.rank),
            None => bail!("rank is required for datasets outside the registry"),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(datasets::data_dir)
    }
}
