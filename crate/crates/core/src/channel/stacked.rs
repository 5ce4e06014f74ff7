//! Sparse Kraus operators stacked on one shared pattern.

use num_complex::Complex;
use rayon::prelude::*;

use crate::linalg::{CMatrix, CsrMatrix};
use crate::scalar::{Op, Real};

/// `d` sparse `n x n` operators on the union of their patterns.
///
/// [`StackedSparse::sandwich_sum`] evaluates `Σ_s K_s X K_s*` one output row
/// at a time. Row `i` of `K_s X` for every `s` at once is a small dense
/// product of the `d x nnz_i` block of stacked values with the `nnz_i` rows
/// of `X` in the pattern of row `i`; the right multiplication is then a
/// sparse pass over the other rows' patterns with the sum over `s` innermost.
#[derive(Clone, Debug)]
pub(crate) struct StackedSparse<T> {
    n: usize,
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Values as `[entry][s]`, split planes.
    re: Vec<T>,
    im: Vec<T>,
    /// Empty when every value is real; otherwise, per row, the
    /// `d x nnz_i` block as `[s][entry]`.
    block: Vec<Complex<T>>,
    max_row: usize,
}

impl<T: Real> StackedSparse<T> {
    pub(crate) fn new(n: usize, ops: &[&CsrMatrix<Complex<T>>]) -> Self {
        let d = ops.len();
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for i in 0..n {
            let start = indices.len();
            for op in ops {
                indices.extend_from_slice(op.row(i).0);
            }
            indices[start..].sort_unstable();
            let mut row: Vec<usize> = indices.drain(start..).collect();
            row.dedup();
            indices.extend(row);
            indptr.push(indices.len());
        }
        let nnz = indices.len();
        let mut re = vec![T::zero(); nnz * d];
        let mut im = vec![T::zero(); nnz * d];
        for (s, op) in ops.iter().enumerate() {
            for i in 0..n {
                let row = &indices[indptr[i]..indptr[i + 1]];
                let (cols, vals) = op.row(i);
                for (&j, v) in cols.iter().zip(vals) {
                    let p = indptr[i] + row.binary_search(&j).expect("column in union pattern");
                    re[p * d + s] = v.re;
                    im[p * d + s] = v.im;
                }
            }
        }
        let transposed = |plane: &[T]| {
            let mut out = vec![T::zero(); nnz * d];
            for i in 0..n {
                let (a, b) = (indptr[i], indptr[i + 1]);
                let w = b - a;
                for p in 0..w {
                    for s in 0..d {
                        out[a * d + s * w + p] = plane[(a + p) * d + s];
                    }
                }
            }
            out
        };
        let block = if im.iter().all(|v| v.is_zero()) {
            Vec::new()
        } else {
            let (r, m) = (transposed(&re), transposed(&im));
            r.into_iter().zip(m).map(|(a, b)| Complex::new(a, b)).collect()
        };
        let max_row = (0..n).map(|i| indptr[i + 1] - indptr[i]).max().unwrap_or(0);
        Self {
            n,
            d,
            indptr,
            indices,
            re,
            im,
            block,
            max_row,
        }
    }

    /// `Σ_s K_s X K_s*`.
    pub(crate) fn sandwich_sum(&self, x: &CMatrix<T>) -> CMatrix<T> {
        let n = self.n;
        let xreal = x.as_slice().iter().all(|v| v.im.is_zero());
        let mut out = CMatrix::zeros(n, n);
        out.as_mut_slice().par_chunks_mut(n).enumerate().for_each_init(
            || Scratch::new(self),
            |scratch, (i, orow)| self.row_dispatch(x, xreal, i, orow, scratch),
        );
        out
    }

    fn is_real(&self) -> bool {
        self.block.is_empty()
    }

    fn row_dispatch(&self, x: &CMatrix<T>, xreal: bool, i: usize, orow: &mut [Complex<T>], scratch: &mut Scratch<T>) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                // SAFETY: the feature was detected at runtime.
                return unsafe { self.row_avx512(x, xreal, i, orow, scratch) };
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the feature was detected at runtime.
                return unsafe { self.row_avx2(x, xreal, i, orow, scratch) };
            }
        }
        self.row(x, xreal, i, orow, scratch)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f")]
    unsafe fn row_avx512(&self, x: &CMatrix<T>, xreal: bool, i: usize, orow: &mut [Complex<T>], scratch: &mut Scratch<T>) {
        self.row(x, xreal, i, orow, scratch)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn row_avx2(&self, x: &CMatrix<T>, xreal: bool, i: usize, orow: &mut [Complex<T>], scratch: &mut Scratch<T>) {
        self.row(x, xreal, i, orow, scratch)
    }

    /// Output row `i`. The lanes over `s` are independent and summed in a
    /// fixed order, so every instruction set gives the same bits.
    #[inline(always)]
    fn row(&self, x: &CMatrix<T>, xreal: bool, i: usize, orow: &mut [Complex<T>], scratch: &mut Scratch<T>) {
        let (n, d) = (self.n, self.d);
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        let w = b - a;
        let rows = &self.indices[a..b];
        let Scratch { gather, t, acc_re, acc_im } = scratch;
        // Row `l` of `t` (2n x d) holds (K_s X)[i, l] over `s`, real parts
        // at `2l`, imaginary parts at `2l + 1`.
        if self.is_real() && xreal {
            // Everything is real: t keeps only the first n rows.
            let g = &mut gather[..w * n];
            for (dst, &k) in g.chunks_exact_mut(n).zip(rows) {
                for (g, v) in dst.iter_mut().zip(x.row(k)) {
                    *g = v.re;
                }
            }
            T::gemm_real(n, d, w, g, Op::H, &self.re[a * d..b * d], &mut t[..n * d]);
            for (j, o) in orow.iter_mut().enumerate() {
                let (a, b) = (self.indptr[j], self.indptr[j + 1]);
                let sr = lane_dot(d, &self.indices[a..b], &self.re[a * d..b * d], t, (1, 0), acc_re);
                *o = Complex::new(sr, T::zero());
            }
            return;
        }
        if self.is_real() {
            // Complex rows of X read as interleaved reals, so the product
            // with the real block is one real gemm.
            let g = &mut gather[..w * 2 * n];
            for (dst, &k) in g.chunks_exact_mut(2 * n).zip(rows) {
                for (pair, v) in dst.chunks_exact_mut(2).zip(x.row(k)) {
                    pair[0] = v.re;
                    pair[1] = v.im;
                }
            }
            T::gemm_real(2 * n, d, w, g, Op::H, &self.re[a * d..b * d], t);
        } else {
            let mut g = Vec::with_capacity(w * n);
            for &k in rows {
                g.extend_from_slice(x.row(k));
            }
            let mut prod = vec![Complex::new(T::zero(), T::zero()); d * n];
            let one = Complex::new(T::one(), T::zero());
            T::gemm(d, n, w, one, &self.block[a * d..b * d], Op::N, &g, Op::N, false, &mut prod);
            for (s, prow) in prod.chunks_exact(n).enumerate() {
                for (l, v) in prow.iter().enumerate() {
                    t[2 * l * d + s] = v.re;
                    t[(2 * l + 1) * d + s] = v.im;
                }
            }
        }
        // out[i, j] = Σ_s Σ_l t[l][s] conj(K_s[j, l]), each lane `s` summed
        // over the pattern in order, then the lanes in order.
        if self.is_real() {
            for (j, o) in orow.iter_mut().enumerate() {
                let (a, b) = (self.indptr[j], self.indptr[j + 1]);
                let (cols, k) = (&self.indices[a..b], &self.re[a * d..b * d]);
                let sr = lane_dot(d, cols, k, t, (2, 0), acc_re);
                let si = lane_dot(d, cols, k, t, (2, 1), acc_re);
                *o = Complex::new(sr, si);
            }
            return;
        }
        for (j, o) in orow.iter_mut().enumerate() {
            let (a, b) = (self.indptr[j], self.indptr[j + 1]);
            let (re, im) = (&self.re[a * d..b * d], &self.im[a * d..b * d]);
            acc_re.fill(T::zero());
            acc_im.fill(T::zero());
            for ((&l, kr), ki) in self.indices[a..b].iter().zip(re.chunks_exact(d)).zip(im.chunks_exact(d)) {
                let (tr, ti) = t[2 * l * d..(2 * l + 2) * d].split_at(d);
                for (((((ar, ai), &a), &b), &u), &v) in acc_re.iter_mut().zip(acc_im.iter_mut()).zip(kr).zip(ki).zip(tr).zip(ti) {
                    *ar += u * a + v * b;
                    *ai += v * a - u * b;
                }
            }
            let (mut sr, mut si) = (T::zero(), T::zero());
            for (&a, &b) in acc_re.iter().zip(acc_im.iter()) {
                sr += a;
                si += b;
            }
            *o = Complex::new(sr, si);
        }
    }
}

/// `Σ_p Σ_s t[row(l_p)][s] k[p][s]` with `row(l) = mul·l + add`. Each lane
/// `s` accumulates over `p` in order. Common `d` get a fixed-size
/// accumulator that stays in registers and a pairwise reduction over lanes;
/// other `d` sum the lanes in order. Either way the order depends only on `d`.
#[inline(always)]
fn lane_dot<T: Real>(d: usize, cols: &[usize], k: &[T], t: &[T], row: (usize, usize), acc: &mut [T]) -> T {
    match d {
        4 => lane_dot_fixed::<T, 4>(cols, k, t, row),
        8 => lane_dot_fixed::<T, 8>(cols, k, t, row),
        16 => lane_dot_fixed::<T, 16>(cols, k, t, row),
        32 => lane_dot_fixed::<T, 32>(cols, k, t, row),
        64 => lane_dot_fixed::<T, 64>(cols, k, t, row),
        _ => {
            acc.fill(T::zero());
            for (&l, kr) in cols.iter().zip(k.chunks_exact(d)) {
                let r = row.0 * l + row.1;
                for ((a, &kv), &tv) in acc.iter_mut().zip(kr).zip(&t[r * d..(r + 1) * d]) {
                    *a += tv * kv;
                }
            }
            let mut out = T::zero();
            for &a in acc.iter() {
                out += a;
            }
            out
        }
    }
}

#[inline(always)]
fn lane_dot_fixed<T: Real, const D: usize>(cols: &[usize], k: &[T], t: &[T], row: (usize, usize)) -> T {
    let mut acc = [T::zero(); D];
    for (&l, kr) in cols.iter().zip(k.chunks_exact(D)) {
        let r = row.0 * l + row.1;
        let kr: &[T; D] = kr.try_into().expect("D lanes");
        let tr: &[T; D] = t[r * D..(r + 1) * D].try_into().expect("D lanes");
        for s in 0..D {
            acc[s] += tr[s] * kr[s];
        }
    }
    let mut width = D;
    while width > 1 {
        width /= 2;
        for s in 0..width {
            acc[s] += acc[s + width];
        }
    }
    acc[0]
}

struct Scratch<T> {
    gather: Vec<T>,
    t: Vec<T>,
    acc_re: Vec<T>,
    acc_im: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(st: &StackedSparse<T>) -> Self {
        let (n, d) = (st.n, st.d);
        Self {
            gather: vec![T::zero(); if st.is_real() { st.max_row * 2 * n } else { 0 }],
            t: vec![T::zero(); 2 * n * d],
            acc_re: vec![T::zero(); d],
            acc_im: vec![T::zero(); d],
        }
    }
}
