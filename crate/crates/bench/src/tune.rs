//! Step-size tuning over a fixed multiplicative grid around the theoretical step.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    /// Sorted ascending.
    pub multipliers: Vec<f64>,
}

impl Default for TuneGrid {
    /// `{1, 2, 5} × 10^k`, `k ∈ {−2, …, 2}`: 15 candidates.
    fn default() -> Self {
        let mut multipliers: Vec<f64> = (-2..=2)
            .flat_map(|k| [1.0, 2.0, 5.0].map(|m| m * 10f64.powi(k)))
            .collect();
        multipliers.sort_by(f64::total_cmp);
        Self { multipliers }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub multiplier: f64,
    pub step: f64,
    /// Final objective after the short budget; absent if the run failed.
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub base_step: f64,
    pub step: f64,
    pub multiplier: f64,
    pub candidates: Vec<Candidate>,
}

/// Evaluates every candidate (in parallel) and keeps the one with the
/// smallest final objective; exact ties go to the smaller step.
pub fn tune_step<F>(grid: &TuneGrid, base_step: f64, eval: F) -> Result<TuneResult>
where
    F: Fn(f64) -> curvlasso::Result<f64> + Sync,
{
    let candidates: Vec<Candidate> = grid
        .multipliers
        .par_iter()
        .map(|&m| {
            let step = base_step * m;
            match eval(step) {
                Ok(obj) if obj.is_finite() => Candidate {
                    multiplier: m,
                    step,
                    objective: Some(obj),
                    error: None,
                },
                Ok(obj) => Candidate {
                    multiplier: m,
                    step,
                    objective: None,
                    error: Some(format!("non-finite objective {obj}")),
                },
                Err(e) => Candidate {
                    multiplier: m,
                    step,
                    objective: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut best: Option<&Candidate> = None;
    for c in &candidates {
        if let Some(obj) = c.objective {
            if best.map_or(true, |b| obj < b.objective.expect("best has objective")) {
                best = Some(c);
            }
        }
    }
    let Some(best) = best else {
        let lines: Vec<String> = candidates
            .iter()
            .map(|c| format!("  x{:e}: {}", c.multiplier, c.error.as_deref().unwrap_or("?")))
            .collect();
        bail!("every step-size candidate failed:\n{}", lines.join("\n"));
    };
    Ok(TuneResult {
        base_step,
        step: best.step,
        multiplier: best.multiplier,
        candidates: candidates.clone(),
    })
}
