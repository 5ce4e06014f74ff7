//! The scalar abstraction. All numerical code is generic over [`Real`];
//! dense kernels (gemm, eigendecompositions, SVD) dispatch to faer for the
//! concrete float types.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use faer::linalg::matmul::matmul_with_conj;
use faer::{Accum, Conj, MatMut, MatRef, Par, Side};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// How an operand enters a product: as stored, or as its conjugate transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    N,
    H,
}

/// Real field underlying the complex scalars.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Sum
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `c = alpha * op(a) * op(b)`, or `c += ...` when `accumulate`.
    ///
    /// All buffers are row-major and contiguous; `op(a)` is `m x k`, `op(b)`
    /// is `k x n`, so `a` itself is stored `k x m` when `a_op == Op::H`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        n: usize,
        k: usize,
        alpha: Complex<Self>,
        a: &[Complex<Self>],
        a_op: Op,
        b: &[Complex<Self>],
        b_op: Op,
        accumulate: bool,
        c: &mut [Complex<Self>],
    );

    /// `c = op(a) b` for real row-major `b` (`k x n`); `a` is stored `m x k`
    /// for [`Op::N`] and `k x m` for [`Op::H`] (a plain transpose here).
    fn gemm_real(m: usize, n: usize, k: usize, a: &[Self], a_op: Op, b: &[Self], c: &mut [Self]);

    /// Eigenvalues in nondecreasing order and the matching eigenvectors as the
    /// columns of a row-major `n x n` matrix. Only the lower triangle is read.
    fn hermitian_eigen(n: usize, a: &[Complex<Self>]) -> Result<(Vec<Self>, Vec<Complex<Self>>)>;

    fn hermitian_eigenvalues(n: usize, a: &[Complex<Self>]) -> Result<Vec<Self>>;

    /// Singular values in nonincreasing order.
    fn singular_values(m: usize, n: usize, a: &[Complex<Self>]) -> Result<Vec<Self>>;

    /// Eigenvalues of a general square matrix, unordered.
    fn eigenvalues(n: usize, a: &[Complex<Self>]) -> Result<Vec<Complex<Self>>>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                n: usize,
                k: usize,
                alpha: Complex<Self>,
                a: &[Complex<Self>],
                a_op: Op,
                b: &[Complex<Self>],
                b_op: Op,
                accumulate: bool,
                c: &mut [Complex<Self>],
            ) {
                assert_eq!(a.len(), m * k, "gemm: lhs buffer");
                assert_eq!(b.len(), k * n, "gemm: rhs buffer");
                assert_eq!(c.len(), m * n, "gemm: output buffer");
                let (lhs, conj_lhs) = match a_op {
                    Op::N => (MatRef::from_row_major_slice(a, m, k), Conj::No),
                    Op::H => (MatRef::from_row_major_slice(a, k, m).transpose(), Conj::Yes),
                };
                let (rhs, conj_rhs) = match b_op {
                    Op::N => (MatRef::from_row_major_slice(b, k, n), Conj::No),
                    Op::H => (MatRef::from_row_major_slice(b, n, k).transpose(), Conj::Yes),
                };
                let dst = MatMut::from_row_major_slice_mut(c, m, n);
                let beta = if accumulate { Accum::Add } else { Accum::Replace };
                matmul_with_conj(dst, beta, lhs, conj_lhs, rhs, conj_rhs, alpha, Par::Seq);
            }

            fn gemm_real(m: usize, n: usize, k: usize, a: &[Self], a_op: Op, b: &[Self], c: &mut [Self]) {
                assert_eq!(a.len(), m * k, "gemm_real: lhs buffer");
                assert_eq!(b.len(), k * n, "gemm_real: rhs buffer");
                assert_eq!(c.len(), m * n, "gemm_real: output buffer");
                let lhs = match a_op {
                    Op::N => MatRef::from_row_major_slice(a, m, k),
                    Op::H => MatRef::from_row_major_slice(a, k, m).transpose(),
                };
                let rhs = MatRef::from_row_major_slice(b, k, n);
                let dst = MatMut::from_row_major_slice_mut(c, m, n);
                matmul_with_conj(dst, Accum::Replace, lhs, Conj::No, rhs, Conj::No, 1.0, Par::Seq);
            }

            fn hermitian_eigen(n: usize, a: &[Complex<Self>]) -> Result<(Vec<Self>, Vec<Complex<Self>>)> {
                if let Some(re) = real_parts(a) {
                    let evd = MatRef::from_row_major_slice(&re, n, n)
                        .self_adjoint_eigen(Side::Lower)
                        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                    let values = evd.S().column_vector().iter().copied().collect();
                    let u = evd.U();
                    let mut vectors = Vec::with_capacity(n * n);
                    for i in 0..n {
                        for j in 0..n {
                            vectors.push(Complex::new(u[(i, j)], 0.0));
                        }
                    }
                    return Ok((values, vectors));
                }
                let mat = MatRef::from_row_major_slice(a, n, n);
                let evd = mat
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                let values = evd.S().column_vector().iter().map(|z| z.re).collect();
                let u = evd.U();
                let mut vectors = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        vectors.push(u[(i, j)]);
                    }
                }
                Ok((values, vectors))
            }

            fn hermitian_eigenvalues(n: usize, a: &[Complex<Self>]) -> Result<Vec<Self>> {
                if let Some(re) = real_parts(a) {
                    return MatRef::from_row_major_slice(&re, n, n)
                        .self_adjoint_eigenvalues(Side::Lower)
                        .map_err(|e| Error::Factorization(format!("{e:?}")));
                }
                MatRef::from_row_major_slice(a, n, n)
                    .self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))
            }

            fn singular_values(m: usize, n: usize, a: &[Complex<Self>]) -> Result<Vec<Self>> {
                MatRef::from_row_major_slice(a, m, n)
                    .singular_values()
                    .map_err(|e| Error::Factorization(format!("{e:?}")))
            }

            fn eigenvalues(n: usize, a: &[Complex<Self>]) -> Result<Vec<Complex<Self>>> {
                MatRef::from_row_major_slice(a, n, n)
                    .eigenvalues()
                    .map_err(|e| Error::Factorization(format!("{e:?}")))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// The real parts when every imaginary part is zero. Real symmetric input
/// then goes to the real eigensolver, which is several times cheaper and
/// returns exactly real eigenvectors.
fn real_parts<T: Real>(a: &[Complex<T>]) -> Option<Vec<T>> {
    a.iter().all(|z| z.im.is_zero()).then(|| a.iter().map(|z| z.re).collect())
}

/// Complex zero and one without spelling out `Complex::new`.
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

pub fn creal<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}
