//! Randomized block Lanczos: a rank-`r` factorization `M ≈ U diag(Σ) Vᵀ`
//! computed once from a Krylov subspace seeded with a Gaussian block.
//!
//! The Krylov space `[MΠ, (MMᵀ)MΠ, …, (MMᵀ)^q MΠ]` is built block by block.
//! Each new block is produced from the orthonormalized previous block and
//! orthonormalized against everything accumulated so far, so the raw powers
//! (which become collinear quickly) are never formed. The span is the same.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::Problem;
use crate::error::{contract, Error, Result};
use crate::linalg::{
    dense_svd, orthonormalize, spectral_norm, DenseMatrix, DenseVector, LinearOperator, Scaled, Svd,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub rank: usize,
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
    #[serde(default)]
    pub q_override: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_eps_prime() -> f64 {
    0.5
}

impl SketchConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        Self {
            rank,
            eps_prime: default_eps_prime(),
            q_override: None,
            seed,
        }
    }

    /// Number of `MMᵀ` applications: `ceil(ln d / √ε′)` unless overridden.
    pub fn power_iters(&self, d: usize) -> usize {
        self.q_override
            .unwrap_or_else(|| ((d.max(1) as f64).ln() / self.eps_prime.sqrt()).ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactors {
    /// `n × r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: DenseVector,
    /// `d × r`, orthonormal columns.
    pub v: DenseMatrix,
    /// Set when the Krylov space had numerical rank below the requested rank;
    /// the factors then have fewer columns than asked for.
    pub rank_deficient: bool,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Materializes `U diag(Σ) Vᵀ` (tests and small problems only).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.n_rows() {
            for (k, s) in self.sigma.iter().enumerate() {
                us[(i, k)] *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("factor shapes agree")
    }
}

pub fn block_lanczos<M: LinearOperator + ?Sized>(m: &M, cfg: &SketchConfig) -> Result<LowRankFactors> {
    let (n, d) = (m.n_rows(), m.n_cols());
    contract!(
        cfg.rank >= 1 && cfg.rank <= n.min(d),
        "rank {} must lie in [1, min(n, d) = {}]",
        cfg.rank,
        n.min(d)
    );
    contract!(
        cfg.eps_prime > 0.0 && cfg.eps_prime < 1.0,
        "eps_prime must lie in (0, 1), got {}",
        cfg.eps_prime
    );
    let r = cfg.rank;
    let q = cfg.power_iters(d);

    let mut rng = rng::seeded(cfg.seed);
    let pi = DenseMatrix::from_row_major(d, r, rng::gaussian_vec(&mut rng, d * r))?;

    let first: Vec<Vec<f64>> = pi
        .columns()
        .iter()
        .map(|c| m.apply(c).map(DenseVector::into_vec))
        .collect::<Result<_>>()?;
    let mut basis: Vec<Vec<f64>> = orthonormalize(first, &[]);
    let mut block_start = 0;
    for _ in 0..q {
        let prev = &basis[block_start..];
        if prev.is_empty() {
            break;
        }
        let next: Vec<Vec<f64>> = prev
            .iter()
            .map(|col| {
                let t = m.apply_t(col)?;
                m.apply(&t).map(DenseVector::into_vec)
            })
            .collect::<Result<_>>()?;
        let fresh = orthonormalize(next, &basis);
        block_start = basis.len();
        basis.extend(fresh);
    }
    if basis.is_empty() {
        return Err(Error::Contract("block_lanczos: operator is zero".into()));
    }

    // B = QᵀM, computed row by row as (Mᵀ q_i)ᵀ.
    let k = basis.len();
    let mut b = DenseMatrix::zeros(k, d);
    for (i, qi) in basis.iter().enumerate() {
        b.row_mut(i).copy_from_slice(&m.apply_t(qi)?);
    }
    let Svd { u: w, s, v } = dense_svd(&b);
    let keep = r.min(s.len());
    let q_mat = DenseMatrix::from_columns(n, &basis);
    let u = q_mat.matmul(&w.truncate_cols(keep))?;
    Ok(LowRankFactors {
        u,
        sigma: s[..keep].to_vec().into(),
        v: v.truncate_cols(keep),
        rank_deficient: keep < r,
    })
}

/// Sketches `A/√n`, the operator whose Gram matrix is the sample correlation `C`.
pub fn sketch_problem(problem: &Problem, cfg: &SketchConfig) -> Result<LowRankFactors> {
    let op = Scaled {
        inner: &problem.a,
        scale: 1.0 / (problem.n() as f64).sqrt(),
    };
    block_lanczos(&op, cfg)
}

/// Rayleigh-quotient gaps `|u_iᵀMMᵀu_i − ū_iᵀMMᵀū_i|` between the sketched
/// left vectors and the exact ones from `reference`.
pub fn per_vector_error_stat<M: LinearOperator + ?Sized>(
    m: &M,
    factors: &LowRankFactors,
    reference: &Svd,
) -> Result<Vec<f64>> {
    (0..factors.rank())
        .map(|i| {
            let approx = m.apply_t(&factors.u.col(i))?;
            let exact = m.apply_t(&reference.u.col(i))?;
            Ok((approx.dot(&approx) - exact.dot(&exact)).abs())
        })
        .collect()
}

/// `M − U diag(Σ) Vᵀ` as an operator.
struct Residual<'a, M: ?Sized> {
    m: &'a M,
    f: &'a LowRankFactors,
}

impl<'a, M: LinearOperator + ?Sized> LinearOperator for Residual<'a, M> {
    fn n_rows(&self) -> usize {
        self.m.n_rows()
    }
    fn n_cols(&self) -> usize {
        self.m.n_cols()
    }
    fn apply(&self, x: &[f64]) -> Result<DenseVector> {
        let mut y = self.m.apply(x)?;
        let mut c = self.f.v.matvec_t(x)?;
        c.iter_mut().zip(self.f.sigma.iter()).for_each(|(ci, s)| *ci *= s);
        let low = self.f.u.matvec(&c)?;
        y.axpy(-1.0, &low);
        Ok(y)
    }
    fn apply_t(&self, y: &[f64]) -> Result<DenseVector> {
        let mut x = self.m.apply_t(y)?;
        let mut c = self.f.u.matvec_t(y)?;
        c.iter_mut().zip(self.f.sigma.iter()).for_each(|(ci, s)| *ci *= s);
        let low = self.f.v.matvec(&c)?;
        x.axpy(-1.0, &low);
        Ok(x)
    }
}

/// `‖M − U diag(Σ) Vᵀ‖₂` by power iteration.
pub fn approximation_error<M: LinearOperator + ?Sized>(
    m: &M,
    factors: &LowRankFactors,
    seed: u64,
) -> Result<f64> {
    let res = Residual { m, f: factors };
    Ok(spectral_norm(&res, 1e-12, 20_000, seed)?.value)
}

const MAGIC: &[u8; 5] = b"CLRF1";

/// Binary layout: `"CLRF1"`, then little-endian `u64` n, d, r, then `f64`
/// payloads U (n×r row-major), Σ (r), V (d×r row-major).
pub fn write_factors<W: Write>(mut w: W, f: &LowRankFactors) -> Result<()> {
    w.write_all(MAGIC)?;
    for dim in [f.u.n_rows(), f.v.n_rows(), f.rank()] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for x in f.u.data().iter().chain(f.sigma.iter()).chain(f.v.data()) {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_factors<R: Read>(mut r: R) -> Result<LowRankFactors> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a CLRF1 factor file".into()));
    }
    let mut dims = [0usize; 3];
    for dim in dims.iter_mut() {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        *dim = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| Error::Format("dimension overflows usize".into()))?;
    }
    let [n, d, rank] = dims;
    let mut read_vec = |len: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let u = DenseMatrix::from_row_major(n, rank, read_vec(n * rank)?)?;
    let sigma = read_vec(rank)?.into();
    let v = DenseMatrix::from_row_major(d, rank, read_vec(d * rank)?)?;
    Ok(LowRankFactors {
        u,
        sigma,
        v,
        rank_deficient: false,
    })
}
