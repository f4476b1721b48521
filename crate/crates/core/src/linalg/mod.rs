//! Dense and sparse kernels used by every other module.

mod dense;
mod power;
mod qr;
mod sparse;
mod svd;

pub use dense::{axpy, dot, norm2, DenseMatrix, DenseVector};
pub use power::{spectral_norm, SpectralNorm, DEFAULT_MAX_ITERS, DEFAULT_TOL};
pub(crate) use qr::orthonormalize;
pub use qr::{thin_qr, DROP_TOL};
pub use sparse::{LinearOperator, Scaled, SparseMatrix};
pub use svd::{dense_svd, sym_eigen, Svd, SymEigen, JACOBI_TOL};
