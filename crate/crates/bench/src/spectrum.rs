//! Leading eigenvalues of the sample correlation matrix `C = AᵀA/n`.

use std::fmt::Write as _;

use curvlasso::data::Problem;
use curvlasso::error::{Error, Result};
use curvlasso::sketch::{sketch_problem, SketchConfig};

/// Power iterations used for spectrum probes; far more than a rank-`r`
/// preconditioner needs, so that the trailing probed values are accurate too.
pub const PROBE_POWER_ITERS: usize = 40;

/// Top `r_probe` eigenvalues of `C`, nonincreasing. Fewer are returned if
/// `A` has lower numerical rank.
pub fn spectrum(problem: &Problem, r_probe: usize, seed: u64) -> Result<Vec<f64>> {
    let max_rank = problem.n().min(problem.d());
    if r_probe == 0 || r_probe > max_rank {
        return Err(Error::Contract(format!("r_probe must be in 1..={max_rank}, got {r_probe}")));
    }
    let cfg = SketchConfig {
        q_override: Some(PROBE_POWER_ITERS),
        ..SketchConfig::new(r_probe, seed)
    };
    let f = sketch_problem(problem, &cfg)?;
    let mut lambdas: Vec<f64> = f.sigma.iter().map(|s| s * s).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(lambdas)
}

/// `index,lambda` CSV, 1-based index.
pub fn spectrum_csv(lambdas: &[f64]) -> String {
    let mut out = String::from("index,lambda\n");
    for (i, l) in lambdas.iter().enumerate() {
        writeln!(out, "{},{l:e}", i + 1).expect("writing to a String");
    }
    out
}

pub fn emit_spectrum(problem: &Problem, r_probe: usize, seed: u64) -> Result<String> {
    Ok(spectrum_csv(&spectrum(problem, r_probe, seed)?))
}

/// `Σ_{i≤r} λ_i / (r λ_r)`: how far the head of the spectrum is from flat.
pub fn head_ratio(lambdas: &[f64], r: usize) -> Option<f64> {
    if r == 0 || r > lambdas.len() || lambdas[r - 1] <= 0.0 {
        return None;
    }
    Some(lambdas[..r].iter().sum::<f64>() / (r as f64 * lambdas[r - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        assert_eq!(spectrum_csv(&[4.0, 0.5]), "index,lambda\n1,4e0\n2,5e-1\n");
        assert_eq!(head_ratio(&[4.0, 1.0], 2), Some(2.5));
        assert_eq!(head_ratio(&[4.0, 0.0], 2), None);
    }
}
