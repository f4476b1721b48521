use serde::{Deserialize, Serialize};

use super::Problem;
use crate::error::{contract, Result};
use crate::linalg::{thin_qr, DenseMatrix, SparseMatrix};
use crate::rng;

/// Recipe for a random problem whose `A/√n` has a prescribed spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Target singular values of `A/√n`, nonincreasing. Missing trailing values are zero.
    pub spectrum: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default = "default_gamma2")]
    pub gamma2: f64,
}

fn default_gamma2() -> f64 {
    1e-3
}

impl SyntheticSpec {
    /// Power-law spectrum `σ_i = scale · i^(−decay)`, `i = 1..=d`.
    pub fn power_law(n: usize, d: usize, scale: f64, decay: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            spectrum: (1..=d).map(|i| scale * (i as f64).powf(-decay)).collect(),
            noise_sigma: 0.0,
            seed,
            gamma1: 0.0,
            gamma2: default_gamma2(),
        }
    }

    pub fn with_regularization(mut self, gamma1: f64, gamma2: f64) -> Self {
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }
}

/// Draws `A = √n · U diag(spectrum) Vᵀ` with Haar-like orthonormal `U` (n×d) and
/// `V` (d×d), a 10%-sparse Gaussian `x_true`, and `b = A x_true + σ·noise`.
/// Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Problem> {
    let SyntheticSpec { n, d, .. } = *spec;
    contract!(d >= 1 && n >= d, "synthetic problems need 1 <= d <= n (got n={n}, d={d})");
    contract!(
        spec.spectrum.len() <= n.min(d),
        "spectrum has {} values but min(n, d) = {}",
        spec.spectrum.len(),
        n.min(d)
    );
    contract!(
        spec.spectrum.iter().all(|s| *s >= 0.0 && s.is_finite()),
        "spectrum must be finite and nonnegative"
    );
    contract!(
        spec.spectrum.windows(2).all(|w| w[0] >= w[1]),
        "spectrum must be nonincreasing"
    );
    contract!(spec.noise_sigma >= 0.0, "noise_sigma must be >= 0");

    let mut rng = rng::seeded(spec.seed);
    let u = orthonormal(&mut rng, n, d)?;
    let v = orthonormal(&mut rng, d, d)?;

    let mut sigma = spec.spectrum.clone();
    sigma.resize(d, 0.0);
    let root_n = (n as f64).sqrt();
    // A = √n U diag(σ) Vᵀ
    let mut us = u.clone();
    for i in 0..n {
        for (k, s) in sigma.iter().enumerate() {
            us[(i, k)] *= root_n * s;
        }
    }
    let a_dense = us.matmul(&v.transpose())?;
    let a = SparseMatrix::from_dense(&a_dense);

    let n_support = ((d as f64) * 0.1).round().max(1.0) as usize;
    let mut perm: Vec<usize> = (0..d).collect();
    for k in 0..n_support {
        let j = k + rng::uniform_index(&mut rng, d - k);
        perm.swap(k, j);
    }
    let mut x_true = vec![0.0; d];
    for &j in &perm[..n_support] {
        x_true[j] = rng::gaussian(&mut rng);
    }
    let mut b = a.matvec(&x_true)?;
    if spec.noise_sigma > 0.0 {
        for bi in b.iter_mut() {
            *bi += spec.noise_sigma * rng::gaussian(&mut rng);
        }
    }
    Problem::new(a, b, spec.gamma1, spec.gamma2)
}

fn orthonormal(rng: &mut rng::Rng, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let g = DenseMatrix::from_row_major(rows, cols, rng::gaussian_vec(rng, rows * cols))?;
    let q = thin_qr(&g);
    contract!(q.n_cols() == cols, "gaussian draw was rank deficient");
    Ok(q)
}
