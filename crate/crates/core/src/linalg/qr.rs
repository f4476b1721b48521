use super::dense::{axpy, dot, norm2, DenseMatrix};

/// Relative threshold below which a Gram–Schmidt residual counts as a dependent direction.
pub const DROP_TOL: f64 = 1e-12;

/// Orthonormal basis for the column space of `m`.
///
/// Modified Gram–Schmidt with a second orthogonalization pass. A column whose
/// residual norm falls under `DROP_TOL` times the largest input column norm is
/// dropped, so the result can have fewer columns than `m`. An all-zero input
/// gives a matrix with zero columns.
pub fn thin_qr(m: &DenseMatrix) -> DenseMatrix {
    let basis = orthonormalize(m.columns(), &[]);
    DenseMatrix::from_columns(m.n_rows(), &basis)
}

/// Orthonormalizes `cols` against `basis` (assumed orthonormal) and against each other.
/// Returns only the newly accepted directions.
pub(crate) fn orthonormalize(cols: Vec<Vec<f64>>, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let reference = cols.iter().map(|c| norm2(c)).fold(0.0, f64::max);
    if reference == 0.0 {
        return Vec::new();
    }
    let threshold = DROP_TOL * reference;
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols {
        for _pass in 0..2 {
            for q in basis.iter().chain(accepted.iter()) {
                let proj = dot(q, &c);
                axpy(-proj, q, &mut c);
            }
        }
        let nrm = norm2(&c);
        if nrm < threshold {
            continue;
        }
        c.iter_mut().for_each(|v| *v /= nrm);
        accepted.push(c);
    }
    accepted
}

/// Extends `basis` (orthonormal vectors of length `dim`) with coordinate directions
/// until it holds `target` vectors.
pub(crate) fn complete_basis(basis: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    let mut k = 0;
    while basis.len() < target.min(dim) && k < dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        k += 1;
        for _pass in 0..2 {
            for q in basis.iter() {
                let proj = dot(q, &e);
                axpy(-proj, q, &mut e);
            }
        }
        let nrm = norm2(&e);
        if nrm > 0.5 {
            e.iter_mut().for_each(|v| *v /= nrm);
            basis.push(e);
        }
    }
}
