//! Dense ground truth for small operators.

use num_complex::Complex;

use super::LinearMap;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cone, czero, Real};

/// Largest operator dimension the dense oracles accept (`n <= 12` for
/// transfer operators on `n x n` matrices).
pub const MAX_ORACLE_DIM: usize = 144;

/// Builds the dense matrix of `op` column by column from basis vectors.
pub fn materialize<T: Real, A: LinearMap<T> + ?Sized>(op: &A) -> Result<CMatrix<T>> {
    let n = op.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::TooLarge {
            what: "dense oracle",
            n,
            max: MAX_ORACLE_DIM,
        });
    }
    let mut m = CMatrix::zeros(n, n);
    let mut e = vec![czero::<T>(); n];
    let mut col = vec![czero::<T>(); n];
    for k in 0..n {
        e[k] = cone();
        op.apply(&e, &mut col);
        e[k] = czero();
        for (i, &v) in col.iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    Ok(m)
}

/// All singular values, nonincreasing.
pub fn dense_svd_oracle<T: Real, A: LinearMap<T> + ?Sized>(op: &A) -> Result<Vec<T>> {
    materialize(op)?.singular_values()
}

/// All eigenvalues, sorted by nonincreasing modulus.
pub fn dense_eigs_oracle<T: Real, A: LinearMap<T> + ?Sized>(op: &A) -> Result<Vec<Complex<T>>> {
    materialize(op)?.eigenvalues()
}
