//! Uniform front end over the main solver and the baselines: theoretical step
//! sizes, batch rules and single runs with a given step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use curvlasso::baselines::{self, katyusha_params, sqrt_n_batch, BaselineConfig, Method};
use curvlasso::data::Problem;
use curvlasso::hessian::{HessianModel, SmoothnessProfile};
use curvlasso::svrg::{self, Sampling, SolverConfig};
use curvlasso::{DenseVector, EpochMeasure, SolverTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// The sketched-curvature accelerated SVRG.
    #[serde(alias = "ours")]
    AccelSvrg,
    Pgd,
    Fista,
    ProxSvrg,
    Katyusha1,
}

impl Solver {
    pub const DEFAULT_SET: [Solver; 4] = [Solver::AccelSvrg, Solver::Fista, Solver::ProxSvrg, Solver::Katyusha1];

    pub fn name(self) -> &'static str {
        match self {
            Solver::AccelSvrg => "accel_svrg",
            Solver::Pgd => "pgd",
            Solver::Fista => "fista",
            Solver::ProxSvrg => "prox_svrg",
            Solver::Katyusha1 => "katyusha1",
        }
    }

    fn baseline(self) -> Option<Method> {
        match self {
            Solver::AccelSvrg => None,
            Solver::Pgd => Some(Method::Pgd),
            Solver::Fista => Some(Method::Fista),
            Solver::ProxSvrg => Some(Method::ProxSvrg),
            Solver::Katyusha1 => Some(Method::Katyusha1),
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Solver::AccelSvrg | Solver::ProxSvrg | Solver::Katyusha1)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accel_svrg" | "ours" => Ok(Solver::AccelSvrg),
            "pgd" => Ok(Solver::Pgd),
            "fista" => Ok(Solver::Fista),
            "prox_svrg" | "proxsvrg" => Ok(Solver::ProxSvrg),
            "katyusha1" | "katyusha" => Ok(Solver::Katyusha1),
            other => Err(format!(
                "unknown method {other:?} (expected accel_svrg, pgd, fista, prox_svrg, katyusha1)"
            )),
        }
    }
}

/// Mini-batch size for the stochastic methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BatchRule {
    /// `round(√n)` for every stochastic method.
    #[default]
    SqrtN,
    /// Each method's own default (`min(n, ⌈60√(L_avg/μ̂)⌉)` for accel_svrg, `√n` for the others).
    Theory,
    Fixed(usize),
}

impl BatchRule {
    fn resolve(self, n: usize) -> Option<usize> {
        match self {
            BatchRule::SqrtN => Some(sqrt_n_batch(n)),
            BatchRule::Theory => None,
            BatchRule::Fixed(b) => Some(b),
        }
    }
}

/// Everything a run needs besides the step, seed and budget.
pub struct SolverContext<'a> {
    pub problem: &'a Problem,
    pub hessian: &'a HessianModel,
    pub profile: &'a SmoothnessProfile,
    /// `λ₁(C)`
    pub lambda_max: f64,
    pub batch: BatchRule,
    pub epoch_measure: EpochMeasure,
    pub budget_multiplier: f64,
    pub wall_clock: bool,
}

impl<'a> SolverContext<'a> {
    fn baseline_config(&self, step: Option<f64>, epochs: f64, seed: u64) -> BaselineConfig {
        BaselineConfig {
            step,
            batch: self.batch.resolve(self.problem.n()),
            max_epochs: Some(epochs),
            seed,
            lambda_max: Some(self.lambda_max),
            ..BaselineConfig::default()
        }
    }

    fn svrg_config(&self, step: Option<f64>, epochs: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            eta: step,
            batch: self.batch.resolve(self.problem.n()),
            max_epochs: Some(epochs),
            epoch_measure: self.epoch_measure,
            sampling: Sampling::Nonuniform,
            seed,
            budget_multiplier: self.budget_multiplier,
            ..SolverConfig::default()
        }
    }

    /// The step each method would use untuned.
    pub fn theoretical_step(&self, solver: Solver) -> curvlasso::Result<f64> {
        let p = self.problem;
        let l = self.lambda_max + p.gamma2;
        Ok(match solver {
            Solver::AccelSvrg => 1.0 / self.profile.l_avg,
            Solver::Pgd | Solver::Fista => 1.0 / l,
            Solver::ProxSvrg => {
                let l_max = (0..p.n()).map(|i| p.a.row_norm_sq(i) + p.gamma2).fold(0.0, f64::max);
                1.0 / (4.0 * l_max)
            }
            Solver::Katyusha1 => katyusha_params(p, &self.baseline_config(None, 1.0, 0))?.y_step,
        })
    }

    /// One run from zero. Divergence comes back as `Error::Diverged` with the partial trace.
    pub fn run(&self, solver: Solver, step: Option<f64>, epochs: f64, seed: u64) -> curvlasso::Result<(DenseVector, SolverTrace)> {
        let out = match solver.baseline() {
            None => svrg::run(self.problem, self.hessian, self.profile, &self.svrg_config(step, epochs, seed)),
            Some(m) => baselines::run(self.problem, m, &self.baseline_config(step, epochs, seed)),
        };
        match out {
            Ok((x, mut trace)) => {
                if !self.wall_clock {
                    trace.strip_wall_clock();
                }
                Ok((x, trace))
            }
            Err(curvlasso::Error::Diverged { outer, inner, mut trace }) => {
                if !self.wall_clock {
                    trace.strip_wall_clock();
                }
                Err(curvlasso::Error::Diverged { outer, inner, trace })
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in Solver::DEFAULT_SET.iter().chain(&[Solver::Pgd]) {
            assert_eq!(s.name().parse::<Solver>().unwrap(), *s);
        }
        assert_eq!("ours".parse::<Solver>().unwrap(), Solver::AccelSvrg);
        assert!("sgd".parse::<Solver>().is_err());
    }
}
