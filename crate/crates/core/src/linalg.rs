//! Dense row-major complex matrices and compressed sparse row storage.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{czero, Op, Real};

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

/// Result of a Hermitian eigendecomposition: eigenvalues ascending, the
/// eigenvectors as columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Diagonal matrix with real entries.
    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// Matrix unit `E_ij` of size `n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = Complex::new(T::one(), T::zero());
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// `op_a(self) * op_b(other)`.
    pub fn mul_op(&self, a_op: Op, other: &Self, b_op: Op) -> Self {
        let (m, k) = match a_op {
            Op::N => (self.rows, self.cols),
            Op::H => (self.cols, self.rows),
        };
        let (k2, n) = match b_op {
            Op::N => (other.rows, other.cols),
            Op::H => (other.cols, other.rows),
        };
        assert_eq!(k, k2, "inner dimensions differ");
        let mut out = Self::zeros(m, n);
        if m * n * k > 0 {
            T::gemm(
                m,
                n,
                k,
                Complex::new(T::one(), T::zero()),
                &self.data,
                a_op,
                &other.data,
                b_op,
                false,
                &mut out.data,
            );
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.mul_op(Op::N, other, Op::N)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, alpha: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    pub fn scale_real(&self, alpha: T) -> Self {
        self.scale(Complex::new(alpha, T::zero()))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex<T>, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(Complex::new(T::one(), T::zero()), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(Complex::new(-T::one(), T::zero()), other);
        out
    }

    pub fn trace(&self) -> Complex<T> {
        self.diag().into_iter().fold(czero(), |acc, z| acc + z)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Frobenius inner product `Tr(self* other)`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).fold(czero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    /// `(self + self*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * half)
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..=i {
                m = m.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        m
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        Ok(())
    }

    /// Eigendecomposition of the Hermitian part of `self`.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen<T>> {
        self.require_square()?;
        let h = self.hermitian_part();
        let (values, vecs) = T::hermitian_eigen(self.rows, &h.data)?;
        Ok(HermitianEigen {
            values,
            vectors: Self {
                rows: self.rows,
                cols: self.rows,
                data: vecs,
            },
        })
    }

    /// Eigenvalues (ascending) of the Hermitian part of `self`.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<T>> {
        self.require_square()?;
        T::hermitian_eigenvalues(self.rows, &self.hermitian_part().data)
    }

    /// Singular values, nonincreasing.
    pub fn singular_values(&self) -> Result<Vec<T>> {
        if self.data.is_empty() {
            return Ok(Vec::new());
        }
        T::singular_values(self.rows, self.cols, &self.data)
    }

    /// Eigenvalues sorted by nonincreasing modulus.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        self.require_square()?;
        let mut ev = T::eigenvalues(self.rows, &self.data)?;
        ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
        Ok(ev)
    }

    /// Operator norm of a Hermitian matrix (largest eigenvalue modulus).
    pub fn hermitian_op_norm(&self) -> Result<T> {
        Ok(self.hermitian_eigenvalues()?.into_iter().fold(T::zero(), |m, v| m.max(v.abs())))
    }

    /// Trace norm of a Hermitian matrix.
    pub fn hermitian_trace_norm(&self) -> Result<T> {
        Ok(self.hermitian_eigenvalues()?.into_iter().map(|v| v.abs()).sum())
    }

    /// `f(self)` for Hermitian `self`, applying `f` to the eigenvalues.
    pub fn hermitian_function(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let HermitianEigen { values, vectors } = self.hermitian_eigen()?;
        let n = self.rows;
        let mut scaled = vectors.clone();
        for i in 0..n {
            for (j, &v) in values.iter().enumerate() {
                scaled[(i, j)] *= f(v);
            }
        }
        Ok(scaled.mul_op(Op::N, &vectors, Op::H))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        Self::from_fn(self.rows * p, self.cols * q, |r, c| self[(r / p, c / q)] * other[(r % p, c % q)])
    }

    /// Numerical rank with threshold `rel_tol * s_max` on singular values.
    pub fn rank(&self, rel_tol: T) -> Result<usize> {
        let s = self.singular_values()?;
        let Some(&smax) = s.first() else { return Ok(0) };
        Ok(s.iter().filter(|&&v| v > rel_tol * smax).count())
    }

    pub fn map<U: Real>(&self, f: impl Fn(Complex<T>) -> Complex<U>) -> CMatrix<U> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix<S> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Copy + Zero + std::ops::AddAssign> CsrMatrix<S> {
    /// Builds from unordered triplets; duplicates are summed, explicit zeros
    /// kept out.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, S)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside {nrows}x{ncols}")));
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<S> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune_zeros();
        Ok(m)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|v| !v.is_zero()) {
            return;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if !self.values[k].is_zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[S]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => S::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let trip = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trip).expect("indices in range")
    }

    pub fn map<U: Copy + Zero + std::ops::AddAssign>(&self, f: impl Fn(S) -> U) -> CsrMatrix<U> {
        let mut out = CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        };
        out.prune_zeros();
        out
    }
}

impl<T: Real> CsrMatrix<Complex<T>> {
    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    /// `self * x` for dense `x`.
    pub fn mul_dense(&self, x: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.ncols, x.rows());
        let c = x.cols();
        let mut out = CMatrix::zeros(self.nrows, c);
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let orow = &mut os[i * c..(i + 1) * c];
            for (&k, &v) in cols.iter().zip(vals) {
                for (o, xv) in orow.iter_mut().zip(&xs[k * c..(k + 1) * c]) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// `x * self` for dense `x`.
    pub fn dense_mul(&self, x: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(x.cols(), self.nrows);
        let r = x.rows();
        let c = self.ncols;
        let mut out = CMatrix::zeros(r, c);
        let os = out.as_mut_slice();
        for a in 0..r {
            let xrow = x.row(a);
            let orow = &mut os[a * c..(a + 1) * c];
            for (k, &xv) in xrow.iter().enumerate() {
                let (cols, vals) = self.row(k);
                for (&j, &v) in cols.iter().zip(vals) {
                    orow[j] += xv * v;
                }
            }
        }
        out
    }

    /// `x * self*` for dense `x`.
    pub fn dense_mul_adjoint(&self, x: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(x.cols(), self.ncols);
        let r = x.rows();
        let mut out = CMatrix::zeros(r, self.nrows);
        for a in 0..r {
            let xrow = x.row(a);
            for b in 0..self.nrows {
                let (cols, vals) = self.row(b);
                let mut acc = czero::<T>();
                for (&k, &v) in cols.iter().zip(vals) {
                    acc += xrow[k] * v.conj();
                }
                out[(a, b)] = acc;
            }
        }
        out
    }
}

impl<T: Real> CsrMatrix<T> {
    /// `self * x` on a real vector.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense_complex(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = Complex::new(v, T::zero());
        }
        m
    }
}

/// A matrix that is either dense or sparse.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix<T> {
    Dense(CMatrix<T>),
    Sparse(CsrMatrix<Complex<T>>),
}

impl<T: Real> Matrix<T> {
    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows(),
            Matrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.cols(),
            Matrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    /// Stored nonzeros (all entries for dense storage).
    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.as_slice().iter().filter(|z| !z.is_zero()).count(),
            Matrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        match self {
            Matrix::Dense(m) => m[(i, j)],
            Matrix::Sparse(m) => m.get(i, j),
        }
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn scale_real(&self, alpha: T) -> Self {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.scale_real(alpha)),
            Matrix::Sparse(m) => Matrix::Sparse(m.map(|z| z * alpha)),
        }
    }

    /// Conjugate transpose, keeping the storage kind.
    pub fn adjoint(&self) -> Self {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.adjoint()),
            Matrix::Sparse(m) => Matrix::Sparse(m.transpose().map(|z| z.conj())),
        }
    }

    /// `self * x`.
    pub fn mul_dense(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match self {
            Matrix::Dense(m) => m.matmul(x),
            Matrix::Sparse(m) => m.mul_dense(x),
        }
    }

    /// `x * self`.
    pub fn dense_mul(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match self {
            Matrix::Dense(m) => x.matmul(m),
            Matrix::Sparse(m) => m.dense_mul(x),
        }
    }

    /// `x * self*`.
    pub fn dense_mul_adjoint(&self, x: &CMatrix<T>) -> CMatrix<T> {
        match self {
            Matrix::Dense(m) => x.mul_op(Op::N, m, Op::H),
            Matrix::Sparse(m) => m.dense_mul_adjoint(x),
        }
    }

    /// Frobenius inner product `Tr(self* other)`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        match (self, other) {
            (Matrix::Dense(a), Matrix::Dense(b)) => a.inner(b),
            (Matrix::Sparse(a), Matrix::Sparse(b)) => {
                let mut acc = czero::<T>();
                for i in 0..a.nrows() {
                    let (ca, va) = a.row(i);
                    let (cb, vb) = b.row(i);
                    let (mut p, mut q) = (0, 0);
                    while p < ca.len() && q < cb.len() {
                        match ca[p].cmp(&cb[q]) {
                            std::cmp::Ordering::Less => p += 1,
                            std::cmp::Ordering::Greater => q += 1,
                            std::cmp::Ordering::Equal => {
                                acc += va[p].conj() * vb[q];
                                p += 1;
                                q += 1;
                            }
                        }
                    }
                }
                acc
            }
            (Matrix::Sparse(a), Matrix::Dense(b)) => a.iter().fold(czero(), |acc, (i, j, v)| acc + v.conj() * b[(i, j)]),
            (Matrix::Dense(a), Matrix::Sparse(b)) => b.iter().fold(czero(), |acc, (i, j, v)| acc + a[(i, j)].conj() * v),
        }
    }
}
