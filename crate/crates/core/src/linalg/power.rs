use super::dense::norm2;
use super::sparse::LinearOperator;
use crate::error::{contract, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 5000;

/// Largest singular value by power iteration on `AᵀA` from a seeded Gaussian start.
///
/// Stops when the relative change of the estimate drops below `tol`. If
/// `max_iters` runs out first, the best estimate is returned with `converged = false`.
pub fn spectral_norm<M: LinearOperator + ?Sized>(
    a: &M,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<SpectralNorm> {
    contract!(a.n_cols() > 0 && a.n_rows() > 0, "spectral_norm of an empty operator");
    let mut rng = rng::seeded(seed);
    let mut x = rng::gaussian_vec(&mut rng, a.n_cols());
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut estimate = 0.0;
    for it in 1..=max_iters {
        let ax = a.apply(&x)?;
        let sigma = ax.norm();
        if sigma == 0.0 {
            // start vector landed in the null space; the operator is zero along it
            contract!(it < max_iters, "spectral_norm: operator appears to be zero");
            x = rng::gaussian_vec(&mut rng, a.n_cols());
            continue;
        }
        let mut y = a.apply_t(&ax)?.into_vec();
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(SpectralNorm {
                value: sigma,
                converged: true,
                iterations: it,
            });
        }
        y.iter_mut().for_each(|v| *v /= ny);
        x = y;
        let change = (sigma - estimate).abs() / sigma;
        estimate = sigma;
        if change < tol {
            return Ok(SpectralNorm {
                value: sigma,
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(SpectralNorm {
        value: estimate,
        converged: false,
        iterations: max_iters,
    })
}
